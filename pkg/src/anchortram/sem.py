"""Data generation from linear structural equation transformation models.

Generation follows the source order A, H, X, Y.  Anchors are exogenous;
interventions either fix them to a constant (do) or replace their
distribution (push) while every mechanism coefficient stays untouched.

The response can be linked three ways:

* additive noise on the response scale, Y = f(X) or X'b_yx, plus confounder
  and anchor terms plus Gaussian noise;
* a continuous transformation link: with Z drawn from the inverse-link
  distribution, Y solves h(Y) = Z + X'b_yx + H'b_yh + A'm_y, so positive
  coefficients increase the response and a fitted shift model recovers
  b_yx as its shift coefficient;
* an ordinal link: the latent Z + linear predictor is cut at fixed levels
  into classes 1..K, stored in the censored encoding.

For continuous links the inverse of h comes either from an explicit
callable or from monotone bisection on a tabulated grid over the support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import special
from scipy.stats import chi2

from .distributions import STD_LOGISTIC, STD_NORMAL, SimpleDistribution
from .errors import ScenarioError
from .tram import Dataset, exact_dataset, ordinal_dataset


@dataclass(frozen=True)
class GaussianNoise:
    """Independent Gaussian components with a common scale and an optional
    scalar or per-component mean."""

    scale: float = 1.0
    mean: Union[float, np.ndarray] = 0.0

    def draw(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        return self.mean + self.scale * rng.standard_normal((n, dim))


@dataclass(frozen=True)
class RademacherNoise:
    """Uniform on {-1, +1}."""

    def draw(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        return rng.integers(0, 2, size=(n, dim)).astype(float) * 2.0 - 1.0


NoiseSpec = Union[GaussianNoise, RademacherNoise]


@dataclass(frozen=True)
class DoIntervention:
    """Replace A by a fixed vector."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))


@dataclass(frozen=True)
class PushIntervention:
    """Replace the law of A."""

    noise: NoiseSpec


Intervention = Optional[Union[DoIntervention, PushIntervention]]


@dataclass(frozen=True)
class AdditiveResponse:
    noise_scale: float


@dataclass(frozen=True)
class TransformationResponse:
    dist: SimpleDistribution
    h: Callable[[np.ndarray], np.ndarray]
    h_inv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class OrdinalResponse:
    dist: SimpleDistribution
    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cuts, dtype=float)
        if np.any(np.diff(cuts) <= 0.0):
            raise ScenarioError("ordinal cut levels must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_classes(self) -> int:
        return len(self.cuts) + 1


ResponseLink = Union[AdditiveResponse, TransformationResponse, OrdinalResponse]


@dataclass(frozen=True)
class SemSpec:
    """Coefficients and noise laws of one structural equation model.

    Dimensions: q anchors, d confounders, p covariates.  m_* are anchor
    effect matrices, b_* the remaining structural coefficients.  When f is
    given it replaces the linear covariate effect X b_yx in the response.
    """

    m_y: np.ndarray       # (q,)
    m_x: np.ndarray       # (p, q)
    m_h: np.ndarray       # (d, q)
    b_yx: np.ndarray      # (p,)
    b_yh: np.ndarray      # (d,)
    b_xh: np.ndarray      # (p, d)
    eps_x: NoiseSpec
    eps_h: NoiseSpec
    eps_a: NoiseSpec
    response: ResponseLink
    b_xx: Optional[np.ndarray] = None  # (p, p), zero when omitted
    b_hh: Optional[np.ndarray] = None  # (d, d), zero when omitted
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        for name in ("m_y", "m_x", "m_h", "b_yx", "b_yh", "b_xh"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def q(self) -> int:
        return len(self.m_y)

    @property
    def p(self) -> int:
        return self.m_x.shape[0]

    @property
    def d(self) -> int:
        return self.m_h.shape[0]


def invert_monotone(
    h: Callable[[np.ndarray], np.ndarray],
    w: np.ndarray,
    support: tuple[float, float],
    grid_size: int = 10_000,
    tol: float = 1e-10,
) -> np.ndarray:
    """Invert a monotone non-decreasing function by bisection on a tabulated
    grid, refined to the requested tolerance.

    Raises when a target value falls outside the tabulated range.
    """
    w = np.asarray(w, dtype=float)
    lo, hi = support
    grid = np.linspace(lo, hi, grid_size)
    hv = np.asarray(h(grid), dtype=float)
    if np.any(np.diff(hv) < 0.0):
        raise ValueError("function is not non-decreasing on the tabulated grid")
    if np.any(w < hv[0] - 1e-12) or np.any(w > hv[-1] + 1e-12):
        raise ValueError("inversion target outside the tabulated range of h")
    idx = np.clip(np.searchsorted(hv, w), 1, grid_size - 1)
    left = grid[idx - 1]
    right = grid[idx]
    for _ in range(64):
        mid = 0.5 * (left + right)
        too_low = np.asarray(h(mid), dtype=float) < w
        left = np.where(too_low, mid, left)
        right = np.where(too_low, right, mid)
        if np.max(right - left) < tol:
            break
    return 0.5 * (left + right)


def _draw_latent(dist: SimpleDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    return dist.sample(rng, n)


def sample(sem: SemSpec, n: int, intervention: Intervention = None, seed=0) -> Dataset:
    """Draw n rows from the structural model, optionally intervened on A.

    Each noise source uses its own child stream of the seed, so regenerating
    under an intervention with the same seed reuses identical noise draws
    for H, X and the response.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ss_a, ss_h, ss_x, ss_y = ss.spawn(4)
    rng_a = np.random.default_rng(ss_a)
    rng_h = np.random.default_rng(ss_h)
    rng_x = np.random.default_rng(ss_x)
    rng_y = np.random.default_rng(ss_y)

    q, d, p = sem.q, sem.d, sem.p
    if intervention is None:
        A = sem.eps_a.draw(rng_a, n, q)
    elif isinstance(intervention, DoIntervention):
        if intervention.a.shape != (q,):
            raise ScenarioError(f"do-intervention vector must have length {q}")
        A = np.tile(intervention.a, (n, 1))
    elif isinstance(intervention, PushIntervention):
        A = intervention.noise.draw(rng_a, n, q)
    else:
        raise ScenarioError(f"unknown intervention {intervention!r}")

    H = A @ sem.m_h.T + sem.eps_h.draw(rng_h, n, d)
    if sem.b_hh is not None and np.any(sem.b_hh):
        H = np.linalg.solve(np.eye(d) - sem.b_hh, H.T).T
    X = H @ sem.b_xh.T + A @ sem.m_x.T + sem.eps_x.draw(rng_x, n, p)
    if sem.b_xx is not None and np.any(sem.b_xx):
        X = np.linalg.solve(np.eye(p) - sem.b_xx, X.T).T

    covariate_term = sem.f(X) if sem.f is not None else X @ sem.b_yx
    lin = covariate_term + H @ sem.b_yh + A @ sem.m_y

    link = sem.response
    if isinstance(link, AdditiveResponse):
        y = lin + link.noise_scale * rng_y.standard_normal(n)
        return exact_dataset(y, X, A)
    if isinstance(link, TransformationResponse):
        z = _draw_latent(link.dist, rng_y, n)
        w = z + lin
        if link.h_inv is not None:
            y = np.asarray(link.h_inv(w), dtype=float)
        else:
            if link.support is None:
                raise ScenarioError("transformation link needs h_inv or a support for bisection")
            y = invert_monotone(link.h, w, link.support)
        return exact_dataset(y, X, A)
    if isinstance(link, OrdinalResponse):
        z = _draw_latent(link.dist, rng_y, n)
        w = z + lin
        classes = 1 + np.searchsorted(link.cuts, w, side="left")
        return ordinal_dataset(classes, link.n_classes, X, A)
    raise ScenarioError(f"unknown response link {link!r}")


# ---------------------------------------------------------------------------
# named simulation scenarios
# ---------------------------------------------------------------------------

IV2_M_X_VALUES = (-1.0, 0.5, 1.0)
IV2_K_VALUES = (4, 6, 10)
IV2_DO_LEVELS = (0.0, 1.0, 1.8, 3.0)

_DEFAULT_SIZES = {
    "la": (300, 2000),
    "nla": (300, 2000),
    "iv1": (1000, 2000),
    "iv2": (1000, 2000),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of one named scenario.

    The iv2 knobs are restricted to their standard values unless custom=True.
    """

    scenario: str
    seed: int = 0
    n_train: Optional[int] = None
    n_test: Optional[int] = None
    m_x: float = -1.0          # iv2 instrument strength
    k_classes: int = 10        # iv2 class count
    do_level: float = 1.8      # iv2 test intervention
    custom: bool = False

    def __post_init__(self):
        if self.scenario not in _DEFAULT_SIZES:
            raise ScenarioError(
                f"unknown scenario {self.scenario!r}; expected one of {sorted(_DEFAULT_SIZES)}"
            )
        if self.scenario == "iv2" and not self.custom:
            if self.m_x not in IV2_M_X_VALUES:
                raise ScenarioError(f"iv2 m_x must be one of {IV2_M_X_VALUES} (or pass custom)")
            if self.k_classes not in IV2_K_VALUES:
                raise ScenarioError(f"iv2 k_classes must be one of {IV2_K_VALUES} (or pass custom)")
            if self.do_level not in IV2_DO_LEVELS:
                raise ScenarioError(f"iv2 do_level must be one of {IV2_DO_LEVELS} (or pass custom)")

    def sizes(self) -> tuple[int, int]:
        lo, hi = _DEFAULT_SIZES[self.scenario]
        return self.n_train or lo, self.n_test or hi


@dataclass
class ScenarioBundle:
    train: Dataset
    test: Dataset
    test_unperturbed: Dataset
    meta: dict
    sem: SemSpec
    intervention: Intervention


def _la_sem(rng_structure: np.random.Generator) -> tuple[SemSpec, dict]:
    p, q, d = 10, 2, 1
    beta = np.zeros(p)
    beta[1] = beta[2] = 3.0
    m_x = rng_structure.standard_normal((p, q))
    sem = SemSpec(
        m_y=np.array([-2.0, 0.0]),
        m_x=m_x,
        m_h=np.zeros((d, q)),
        b_yx=beta,
        b_yh=np.array([1.0]),
        b_xh=np.ones((p, d)),
        eps_x=GaussianNoise(1.0),
        eps_h=GaussianNoise(1.0),
        eps_a=GaussianNoise(1.0),
        response=AdditiveResponse(0.25),
    )
    meta = {
        "beta_true": beta.tolist(),
        "m_y": sem.m_y.tolist(),
        "m_x": m_x.tolist(),
        "noise_y_sd": 0.25,
        "model": "lm",
    }
    return sem, meta


def nla_f(X: np.ndarray) -> np.ndarray:
    """Nonlinear covariate effect of the nla scenario, a function of the
    second and third covariates with weak-inequality indicator terms."""
    x2 = X[:, 1]
    x3 = X[:, 2]
    return x2 + x3 + (x2 <= 0.0).astype(float) + ((x2 <= 0.5) & (x3 <= 1.0)).astype(float)


def _nla_sem() -> tuple[SemSpec, dict]:
    p, q, d = 10, 2, 1
    sem = SemSpec(
        m_y=np.zeros(q),
        m_x=np.ones((p, q)),
        m_h=np.zeros((d, q)),
        b_yx=np.zeros(p),
        b_yh=np.array([3.0]),
        b_xh=np.full((p, d), 2.0),
        eps_x=GaussianNoise(0.5),
        eps_h=GaussianNoise(1.0),
        eps_a=GaussianNoise(1.0),
        response=AdditiveResponse(0.25),
        f=nla_f,
    )
    meta = {"noise_y_sd": 0.25, "model": "c-probit", "bernstein_order": 6}
    return sem, meta


IV1_SUPPORT = (float(chi2.ppf(0.001, 3)), float(chi2.ppf(0.999, 3)))


def iv1_transformation(y):
    """Probit-scale transformation whose inverse maps standard normal draws
    to a chi-squared(3) marginal."""
    return special.ndtri(chi2.cdf(y, 3))


def _iv1_h_inv(w):
    return chi2.ppf(special.ndtr(w), 3)


def _iv1_sem() -> tuple[SemSpec, dict]:
    sem = SemSpec(
        m_y=np.array([0.0]),
        m_x=np.array([[0.3]]),
        m_h=np.array([[0.0]]),
        b_yx=np.array([0.3]),
        b_yh=np.array([0.6]),
        b_xh=np.array([[0.6]]),
        eps_x=GaussianNoise(0.75),
        eps_h=GaussianNoise(0.75),
        eps_a=RademacherNoise(),
        response=TransformationResponse(
            dist=STD_NORMAL, h=iv1_transformation, h_inv=_iv1_h_inv, support=IV1_SUPPORT
        ),
    )
    grid = np.linspace(IV1_SUPPORT[0], IV1_SUPPORT[1], 7)
    meta = {
        "beta_true": [0.3],
        "support": list(IV1_SUPPORT),
        "theta_true": iv1_transformation(grid).tolist(),
        "model": "c-probit",
        "bernstein_order": 6,
        "do_level": 3.6,
    }
    return sem, meta


def iv2_cuts(k_classes: int) -> np.ndarray:
    """Latent cut levels: the logistic-scale transformation evaluated at
    evenly spaced interior points of the unit interval."""
    u = np.arange(1, k_classes) / k_classes
    return special.logit(u)


def _iv2_sem(m_x: float, k_classes: int) -> tuple[SemSpec, dict]:
    sem = SemSpec(
        m_y=np.array([0.0]),
        m_x=np.array([[m_x]]),
        m_h=np.array([[0.0]]),
        b_yx=np.array([0.5]),
        b_yh=np.array([1.5]),
        b_xh=np.array([[1.5]]),
        eps_x=GaussianNoise(0.75),
        eps_h=GaussianNoise(0.75),
        eps_a=RademacherNoise(),
        response=OrdinalResponse(dist=STD_LOGISTIC, cuts=iv2_cuts(k_classes)),
    )
    meta = {
        "beta_true": [0.5],
        "m_x": m_x,
        "k_classes": k_classes,
        "cuts": iv2_cuts(k_classes).tolist(),
        "model": "o-logit",
    }
    return sem, meta


def make_scenario(cfg: ScenarioConfig) -> ScenarioBundle:
    """Instantiate a named scenario: training data from the unperturbed
    model, test data under the scenario's intervention, and an unperturbed
    test set of the same size for reference."""
    n_train, n_test = cfg.sizes()
    ss = np.random.SeedSequence(cfg.seed)
    ss_structure, ss_train, ss_test, ss_shift = ss.spawn(4)
    rng_structure = np.random.default_rng(ss_structure)

    if cfg.scenario == "la":
        sem, meta = _la_sem(rng_structure)
        intervention = PushIntervention(GaussianNoise(scale=float(np.sqrt(10.0))))
    elif cfg.scenario == "nla":
        sem, meta = _nla_sem()
        mu = 1.0 + 2.0 * np.random.default_rng(ss_shift).standard_normal(2)
        # component-wise means drawn once per scenario instance
        intervention = PushIntervention(GaussianNoise(scale=1.0, mean=mu))
        meta["push_mean"] = mu.tolist()
    elif cfg.scenario == "iv1":
        sem, meta = _iv1_sem()
        intervention = DoIntervention(np.array([3.6]))
    else:
        sem, meta = _iv2_sem(cfg.m_x, cfg.k_classes)
        intervention = DoIntervention(np.array([cfg.do_level]))
        meta["do_level"] = cfg.do_level

    train = sample(sem, n_train, None, seed=ss_train)
    test = sample(sem, n_test, intervention, seed=ss_test)
    test_plain = sample(sem, n_test, None, seed=ss_test)
    meta.update({"scenario": cfg.scenario, "seed": cfg.seed,
                 "n_train": n_train, "n_test": n_test})
    return ScenarioBundle(train, test, test_plain, meta, sem, intervention)


def scenario_la(seed: int) -> tuple[Dataset, Dataset]:
    b = make_scenario(ScenarioConfig("la", seed=seed))
    return b.train, b.test


def scenario_nla(seed: int) -> tuple[Dataset, Dataset]:
    b = make_scenario(ScenarioConfig("nla", seed=seed))
    return b.train, b.test


def scenario_iv1(seed: int) -> tuple[Dataset, Dataset]:
    b = make_scenario(ScenarioConfig("iv1", seed=seed))
    return b.train, b.test


def scenario_iv2(cfg: ScenarioConfig) -> tuple[Dataset, Dataset]:
    if cfg.scenario != "iv2":
        raise ScenarioError("scenario_iv2 needs an iv2 configuration")
    b = make_scenario(cfg)
    return b.train, b.test
