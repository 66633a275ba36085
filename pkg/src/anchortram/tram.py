"""Transformation-model core.

A model is the triple (inverse-link distribution, response basis, shift
coefficients).  The transformation is ``h(y | x) = b(y)'theta - x'beta``,
so larger beta moves probability mass toward larger responses for every
model type.

Observations are response intervals ``(lower, upper]`` with a censoring kind.
The log-likelihood of a row is, by kind,

    exact      log f(h(y)) + log(b'(y)'theta)
    left       log F(h(upper))
    right      log(1 - F(h(lower)))
    interval   log(F(h(upper)) - F(h(lower)))

Score residuals are the per-row derivative of the log-likelihood with
respect to a constant offset injected on the transformation scale,
evaluated at offset zero.  They exist in closed form for every censoring
kind and the closed forms are implemented here together with their
derivatives, which the penalized fits need.

Ordinal responses are stored in the same censored encoding: class 1 is left
censored at level 1, the top class is right censored at level K-1, interior
classes are intervals between adjacent levels.  Interval probabilities are
floored at 1e-12 during likelihood assembly so coinciding endpoints never
produce an infinite loss.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .basis import (
    BasisSpec,
    BernsteinBasis,
    Constraint,
    LinearBasis,
    OrdinalBasis,
    basis_from_dict,
    basis_to_dict,
    eval_basis,
    eval_basis_deriv,
    is_feasible,
    inverse_reparam,
    reparam_pullback,
    reparam_to_feasible,
)
from .distributions import SimpleDistribution, get_distribution
from .errors import DataFormatError, InfeasibleLikelihoodError, ModelSpecError

EXACT, LEFT, RIGHT, INTERVAL = 0, 1, 2, 3
KIND_NAMES = {EXACT: "exact", LEFT: "left", RIGHT: "right", INTERVAL: "interval"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}

PROB_FLOOR = 1e-12
LOG_FLOOR = math.log(PROB_FLOOR)


@dataclass(frozen=True)
class CensoredObservation:
    """A response interval (lower, upper] with its censoring kind."""

    lower: float
    upper: float
    kind: str

    def __post_init__(self):
        _check_bounds(self.lower, self.upper, self.kind)

    @staticmethod
    def exact(y: float) -> "CensoredObservation":
        return CensoredObservation(float(y), float(y), "exact")

    @staticmethod
    def left(upper: float) -> "CensoredObservation":
        return CensoredObservation(-np.inf, float(upper), "left")

    @staticmethod
    def right(lower: float) -> "CensoredObservation":
        return CensoredObservation(float(lower), np.inf, "right")

    @staticmethod
    def interval(lower: float, upper: float) -> "CensoredObservation":
        return CensoredObservation(float(lower), float(upper), "interval")


def _check_bounds(lower: float, upper: float, kind: str):
    if kind not in KIND_CODES:
        raise DataFormatError(f"unknown censoring kind {kind!r}")
    if math.isnan(lower) or math.isnan(upper):
        raise DataFormatError("NaN response bound")
    if kind == "exact":
        if not (math.isfinite(lower) and lower == upper):
            raise DataFormatError("exact observation needs lower == upper, finite")
    elif kind == "left":
        if not (lower == -np.inf and math.isfinite(upper)):
            raise DataFormatError("left censoring needs lower == -inf and finite upper")
    elif kind == "right":
        if not (math.isfinite(lower) and upper == np.inf):
            raise DataFormatError("right censoring needs finite lower and upper == +inf")
    else:
        if not (math.isfinite(lower) and math.isfinite(upper) and lower < upper):
            raise DataFormatError("interval censoring needs finite lower < upper")


@dataclass
class Dataset:
    """Censored responses with covariates X and anchors A, aligned by row."""

    y_lower: np.ndarray
    y_upper: np.ndarray
    kind: np.ndarray
    X: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        self.y_lower = np.asarray(self.y_lower, dtype=float)
        self.y_upper = np.asarray(self.y_upper, dtype=float)
        self.kind = np.asarray(self.kind, dtype=np.int8)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = len(self.y_lower)
        if self.X.size == 0:
            self.X = self.X.reshape(n, -1)
        if self.A.size == 0:
            self.A = self.A.reshape(n, -1)
        if not (len(self.y_upper) == len(self.kind) == self.X.shape[0] == self.A.shape[0] == n):
            raise DataFormatError("row counts of responses, X and A must agree")
        if np.isnan(self.X).any() or np.isnan(self.A).any():
            raise DataFormatError("X and A must not contain missing values")
        if not (np.isfinite(self.X).all() and np.isfinite(self.A).all()):
            raise DataFormatError("X and A must be finite")
        for i in range(n):
            _check_bounds(self.y_lower[i], self.y_upper[i], KIND_NAMES[int(self.kind[i])])

    @property
    def n(self) -> int:
        return len(self.y_lower)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.A.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(
            self.y_lower[rows], self.y_upper[rows], self.kind[rows], self.X[rows], self.A[rows]
        )

    def replace_anchors(self, A) -> "Dataset":
        return Dataset(self.y_lower, self.y_upper, self.kind, self.X, A)

    @classmethod
    def from_observations(cls, obs: Sequence[CensoredObservation], X=None, A=None) -> "Dataset":
        n = len(obs)
        X = np.zeros((n, 0)) if X is None else X
        A = np.zeros((n, 0)) if A is None else A
        return cls(
            np.array([o.lower for o in obs]),
            np.array([o.upper for o in obs]),
            np.array([KIND_CODES[o.kind] for o in obs], dtype=np.int8),
            X,
            A,
        )

    def observations(self) -> list[CensoredObservation]:
        return [
            CensoredObservation(self.y_lower[i], self.y_upper[i], KIND_NAMES[int(self.kind[i])])
            for i in range(self.n)
        ]

    def to_csv(self, path):
        header = (
            ["y_lower", "y_upper", "kind"]
            + [f"x{j + 1}" for j in range(self.p)]
            + [f"a{j + 1}" for j in range(self.q)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n):
                row = [repr(float(self.y_lower[i])), repr(float(self.y_upper[i])),
                       KIND_NAMES[int(self.kind[i])]]
                row += [repr(float(v)) for v in self.X[i]]
                row += [repr(float(v)) for v in self.A[i]]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError(f"{path}: empty file") from None
            if header[:3] != ["y_lower", "y_upper", "kind"]:
                raise DataFormatError(f"{path}: header must start with y_lower,y_upper,kind")
            x_cols = [c for c in header[3:] if c.startswith("x")]
            a_cols = [c for c in header[3:] if c.startswith("a")]
            if header[3:] != x_cols + a_cols:
                raise DataFormatError(f"{path}: covariate columns must precede anchor columns")
            lowers, uppers, kinds, xs, anchors = [], [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                try:
                    lowers.append(float(row[0]))
                    uppers.append(float(row[1]))
                    xs.append([float(v) for v in row[3 : 3 + len(x_cols)]])
                    anchors.append([float(v) for v in row[3 + len(x_cols) :]])
                except ValueError as exc:
                    raise DataFormatError(f"{path}:{lineno}: {exc}") from None
                if row[2] not in KIND_CODES:
                    raise DataFormatError(f"{path}:{lineno}: unknown kind {row[2]!r}")
                kinds.append(KIND_CODES[row[2]])
        n = len(lowers)
        try:
            return cls(
                np.array(lowers),
                np.array(uppers),
                np.array(kinds, dtype=np.int8),
                np.array(xs, dtype=float).reshape(n, len(x_cols)),
                np.array(anchors, dtype=float).reshape(n, len(a_cols)),
            )
        except DataFormatError as exc:
            raise DataFormatError(f"{path}: {exc}") from None


def exact_dataset(y, X=None, A=None) -> Dataset:
    """Dataset of exact (uncensored) responses."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    return Dataset(
        y, y.copy(), np.full(n, EXACT, dtype=np.int8),
        np.zeros((n, 0)) if X is None else X,
        np.zeros((n, 0)) if A is None else A,
    )


def ordinal_dataset(classes, n_classes: int, X=None, A=None) -> Dataset:
    """Censored encoding of ordinal class labels 1..K.

    Class 1 is left censored at level 1, class K right censored at K-1 and
    interior classes are intervals (k-1, k].
    """
    classes = np.asarray(classes)
    if np.any(classes < 1) or np.any(classes > n_classes):
        raise DataFormatError("ordinal classes must lie in 1..n_classes")
    n = len(classes)
    lower = np.where(classes == 1, -np.inf, classes - 1.0)
    upper = np.where(classes == n_classes, np.inf, classes.astype(float))
    kind = np.full(n, INTERVAL, dtype=np.int8)
    kind[classes == 1] = LEFT
    kind[classes == n_classes] = RIGHT
    return Dataset(
        lower, upper, kind,
        np.zeros((n, 0)) if X is None else X,
        np.zeros((n, 0)) if A is None else A,
    )


@dataclass(frozen=True)
class ModelSpec:
    """Model triple plus the covariate count and parameter constraint."""

    dist: SimpleDistribution
    basis: BasisSpec
    n_covariates: int
    constraint: Optional[Constraint] = None

    def __post_init__(self):
        if self.n_covariates < 0:
            raise ModelSpecError("n_covariates must be non-negative")
        if self.constraint is None:
            object.__setattr__(self, "constraint", self.basis.constraint)
        elif self.constraint is not self.basis.constraint:
            raise ModelSpecError(
                f"constraint {self.constraint} does not match basis kind {self.basis.kind!r}"
            )

    @property
    def theta_dim(self) -> int:
        return self.basis.dim

    @property
    def free_dim(self) -> int:
        return self.basis.dim + self.n_covariates

    def to_dict(self) -> dict:
        return {
            "dist": self.dist.name,
            "basis": basis_to_dict(self.basis),
            "n_covariates": self.n_covariates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            dist = get_distribution(d["dist"])
        except ValueError as exc:
            raise ModelSpecError(str(exc)) from None
        return cls(dist=dist, basis=basis_from_dict(d["basis"]), n_covariates=int(d["n_covariates"]))


@dataclass(frozen=True)
class ParamVector:
    """Baseline coefficients theta and shift coefficients beta."""

    theta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))


def params_from_free(model: ModelSpec, free) -> ParamVector:
    free = np.asarray(free, dtype=float)
    if free.shape != (model.free_dim,):
        raise ValueError(f"expected {model.free_dim} free parameters, got {free.shape}")
    d = model.theta_dim
    return ParamVector(reparam_to_feasible(model.constraint, free[:d]), free[d:].copy())


def free_from_params(model: ModelSpec, params: ParamVector) -> np.ndarray:
    return np.concatenate(
        [inverse_reparam(model.constraint, params.theta), params.beta]
    )


def check_feasible(model: ModelSpec, params: ParamVector):
    if params.theta.shape != (model.theta_dim,):
        raise ModelSpecError(
            f"theta has length {len(params.theta)}, basis dimension is {model.theta_dim}"
        )
    if params.beta.shape != (model.n_covariates,):
        raise ModelSpecError(
            f"beta has length {len(params.beta)}, model has {model.n_covariates} covariates"
        )
    if not is_feasible(model.constraint, params.theta):
        raise InfeasibleLikelihoodError(f"theta violates {model.constraint.value} constraint")


# convenience constructors for the standard model zoo

def lm_model(n_covariates: int) -> ModelSpec:
    """Linear transformation with a standard normal inverse link."""
    from .distributions import STD_NORMAL

    return ModelSpec(STD_NORMAL, LinearBasis(), n_covariates)


def c_probit_model(n_covariates: int, order: int, support: tuple[float, float]) -> ModelSpec:
    from .distributions import STD_NORMAL

    return ModelSpec(STD_NORMAL, BernsteinBasis(order, tuple(support)), n_covariates)


def c_logit_model(n_covariates: int, order: int, support: tuple[float, float]) -> ModelSpec:
    from .distributions import STD_LOGISTIC

    return ModelSpec(STD_LOGISTIC, BernsteinBasis(order, tuple(support)), n_covariates)


def o_logit_model(n_covariates: int, n_classes: int) -> ModelSpec:
    from .distributions import STD_LOGISTIC

    return ModelSpec(STD_LOGISTIC, OrdinalBasis(n_classes), n_covariates)


def bernstein_support_from_data(y, margin: float = 0.05) -> tuple[float, float]:
    """Support rule for fitted Bernstein bases: the finite response range
    widened by a relative margin on each side."""
    y = np.asarray(y, dtype=float)
    y = y[np.isfinite(y)]
    if len(y) == 0:
        raise DataFormatError("no finite response values to derive a support from")
    lo, hi = float(np.min(y)), float(np.max(y))
    width = hi - lo
    if width <= 0.0:
        lo, hi, width = lo - 0.5, hi + 0.5, 1.0
    return lo - margin * width, hi + margin * width


# ---------------------------------------------------------------------------
# likelihood machinery
# ---------------------------------------------------------------------------


@dataclass
class _Workspace:
    """Per-dataset caches reused across likelihood evaluations.

    B_LO holds the basis at the lower bound for exact, right and interval
    rows; B_HI the basis at the upper bound for left and interval rows.
    Unused slots are zero rows so a single matmul evaluates everything.
    """

    n: int
    mask_exact: np.ndarray
    mask_left: np.ndarray
    mask_right: np.ndarray
    mask_interval: np.ndarray
    B_LO: np.ndarray
    B_HI: np.ndarray
    B_PRIME: np.ndarray
    X: np.ndarray


def _prepare(model: ModelSpec, data: Dataset, rows=None) -> _Workspace:
    if rows is not None:
        data = data.subset(rows)
    if data.p != model.n_covariates:
        raise ModelSpecError(
            f"dataset has {data.p} covariates, model expects {model.n_covariates}"
        )
    kind = data.kind
    me = kind == EXACT
    ml = kind == LEFT
    mr = kind == RIGHT
    mi = kind == INTERVAL
    if isinstance(model.basis, OrdinalBasis) and me.any():
        raise ModelSpecError(
            "exact observations are undefined for ordinal models; encode classes "
            "with ordinal_dataset()"
        )
    n, dim = data.n, model.theta_dim
    B_LO = np.zeros((n, dim))
    B_HI = np.zeros((n, dim))
    B_PR = np.zeros((n, dim))
    if me.any():
        B_LO[me] = eval_basis(model.basis, data.y_lower[me])
        B_PR[me] = eval_basis_deriv(model.basis, data.y_lower[me])
    if ml.any():
        B_HI[ml] = eval_basis(model.basis, data.y_upper[ml])
    if mr.any():
        B_LO[mr] = eval_basis(model.basis, data.y_lower[mr])
    if mi.any():
        B_LO[mi] = eval_basis(model.basis, data.y_lower[mi])
        B_HI[mi] = eval_basis(model.basis, data.y_upper[mi])
    return _Workspace(n, me, ml, mr, mi, B_LO, B_HI, B_PR, data.X)


@dataclass
class _Quantities:
    """Row-aligned likelihood pieces.

    gw_* weight the basis rows in the log-likelihood gradient, dw_* weight
    them in the residual Jacobian, r_grad is the residual vector with rows
    zeroed wherever the likelihood floor is active.
    """

    ll: np.ndarray
    resid: np.ndarray
    r_grad: np.ndarray
    gw_lo: np.ndarray
    gw_hi: np.ndarray
    gp: np.ndarray
    dw_lo: np.ndarray
    dw_hi: np.ndarray
    degenerate_interval: bool


def _quantities(model: ModelSpec, theta, beta, ws: _Workspace, offset: float = 0.0) -> _Quantities:
    d = model.dist
    shift = ws.X @ beta + offset
    h_lo = ws.B_LO @ theta - shift
    h_hi = ws.B_HI @ theta - shift

    n = ws.n
    ll = np.zeros(n)
    resid = np.zeros(n)
    r_grad = np.zeros(n)
    gw_lo = np.zeros(n)
    gw_hi = np.zeros(n)
    gp = np.zeros(n)
    dw_lo = np.zeros(n)
    dw_hi = np.zeros(n)
    degenerate = False

    me = ws.mask_exact
    if me.any():
        z = h_lo[me]
        hprime = ws.B_PRIME[me] @ theta
        if np.any(hprime <= 0.0):
            raise InfeasibleLikelihoodError(
                "non-positive transformation derivative at an exact observation"
            )
        ll[me] = d.log_pdf(z) + np.log(hprime)
        r = d.score(z)
        resid[me] = r
        r_grad[me] = r
        gw_lo[me] = -r
        gp[me] = 1.0 / hprime
        dw_lo[me] = d.score_deriv(z)

    ml = ws.mask_left
    if ml.any():
        z = h_hi[ml]
        raw = d.log_cdf(z)
        floored = raw < LOG_FLOOR
        ll[ml] = np.maximum(raw, LOG_FLOOR)
        g = np.exp(d.log_pdf(z) - raw)
        resid[ml] = -g
        r_grad[ml] = np.where(floored, 0.0, -g)
        gw_hi[ml] = np.where(floored, 0.0, g)
        dw_hi[ml] = d.score(z) * g + g * g

    mr = ws.mask_right
    if mr.any():
        z = h_lo[mr]
        raw = d.log_sf(z)
        floored = raw < LOG_FLOOR
        ll[mr] = np.maximum(raw, LOG_FLOOR)
        lam = np.exp(d.log_pdf(z) - raw)
        resid[mr] = lam
        r_grad[mr] = np.where(floored, 0.0, lam)
        gw_lo[mr] = np.where(floored, 0.0, -lam)
        dw_lo[mr] = -d.score(z) * lam + lam * lam

    mi = ws.mask_interval
    if mi.any():
        z_lo, z_hi = h_lo[mi], h_hi[mi]
        F_lo = np.clip(d.cdf(z_lo), PROB_FLOOR, 1.0 - PROB_FLOOR)
        F_hi = np.clip(d.cdf(z_hi), PROB_FLOOR, 1.0 - PROB_FLOOR)
        delta_raw = F_hi - F_lo
        degenerate = bool(np.any(delta_raw < PROB_FLOOR))
        delta = np.maximum(delta_raw, PROB_FLOOR)
        ll[mi] = np.log(delta)
        f_lo, f_hi = d.pdf(z_lo), d.pdf(z_hi)
        fp_lo, fp_hi = d.pdf_prime(z_lo), d.pdf_prime(z_hi)
        num = f_lo - f_hi
        r = num / delta
        resid[mi] = r
        r_grad[mi] = r
        gw_lo[mi] = -f_lo / delta
        gw_hi[mi] = f_hi / delta
        dw_lo[mi] = (fp_lo * delta + num * f_lo) / (delta * delta)
        dw_hi[mi] = (-fp_hi * delta - num * f_hi) / (delta * delta)

    return _Quantities(ll, resid, r_grad, gw_lo, gw_hi, gp, dw_lo, dw_hi, degenerate)


def _grad_theta_beta(ws: _Workspace, q: _Quantities) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the summed log-likelihood in (theta, beta)."""
    grad_theta = ws.B_LO.T @ q.gw_lo + ws.B_HI.T @ q.gw_hi + ws.B_PRIME.T @ q.gp
    grad_beta = ws.X.T @ q.r_grad
    return grad_theta, grad_beta


def loglik_contributions(model: ModelSpec, params: ParamVector, data: Dataset,
                         offset: float = 0.0) -> np.ndarray:
    """Per-row log-likelihood.  The offset argument injects a constant on the
    transformation scale (h - offset); score residuals are its derivative at
    zero and tests use it as the finite-difference oracle."""
    check_feasible(model, params)
    ws = _prepare(model, data)
    return _quantities(model, params.theta, params.beta, ws, offset).ll


def loglik(model: ModelSpec, params: ParamVector, data: Dataset, offset: float = 0.0) -> float:
    """Summed log-likelihood over all rows."""
    return float(np.sum(loglik_contributions(model, params, data, offset)))


def loglik_grad(model: ModelSpec, free_params, data: Dataset) -> np.ndarray:
    """Gradient of the summed log-likelihood in the unconstrained
    parametrization."""
    free = np.asarray(free_params, dtype=float)
    params = params_from_free(model, free)
    ws = _prepare(model, data)
    q = _quantities(model, params.theta, params.beta, ws)
    g_theta, g_beta = _grad_theta_beta(ws, q)
    d = model.theta_dim
    return np.concatenate([reparam_pullback(model.constraint, free[:d], g_theta), g_beta])


def score_residuals(model: ModelSpec, params: ParamVector, data: Dataset) -> np.ndarray:
    """Closed-form score residuals, one per row."""
    check_feasible(model, params)
    ws = _prepare(model, data)
    q = _quantities(model, params.theta, params.beta, ws)
    if q.degenerate_interval:
        raise InfeasibleLikelihoodError(
            "degenerate interval: censoring bounds carry no probability mass "
            "at these parameters"
        )
    return q.resid


def transformation(model: ModelSpec, params: ParamVector, y, x) -> np.ndarray:
    """h(y | x) for a single covariate row x and one or many responses y."""
    check_feasible(model, params)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (model.n_covariates,):
        raise ModelSpecError(f"x must have length {model.n_covariates}")
    shift = float(x @ params.beta)
    scalar = np.isscalar(y) or (isinstance(y, np.ndarray) and np.ndim(y) == 0)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(model.basis, OrdinalBasis):
        K = model.basis.n_classes
        out = np.empty_like(y)
        for i, yi in enumerate(y):
            k = int(round(yi))
            if k <= 0:
                out[i] = -np.inf
            elif k >= K:
                out[i] = np.inf
            else:
                out[i] = params.theta[k - 1] - shift
    else:
        out = eval_basis(model.basis, y) @ params.theta - shift
    return out[0] if scalar else out


def cdf_conditional(model: ModelSpec, params: ParamVector, y, x) -> np.ndarray:
    """Conditional cdf F(h(y | x)); exactly 0/1 at the open ends of an
    ordinal sample space."""
    h = transformation(model, params, y, x)
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    out = np.empty_like(h_arr)
    finite = np.isfinite(h_arr)
    out[finite] = model.dist.cdf(h_arr[finite])
    out[h_arr == np.inf] = 1.0
    out[h_arr == -np.inf] = 0.0
    return float(out[0]) if np.ndim(h) == 0 else out


# ---------------------------------------------------------------------------
# fitted-model serialization
# ---------------------------------------------------------------------------


def save_model(path, model: ModelSpec, params: ParamVector, extra: Optional[dict] = None):
    payload = {
        "spec": model.to_dict(),
        "theta": [float(v) for v in params.theta],
        "beta": [float(v) for v in params.beta],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> tuple[ModelSpec, ParamVector, dict]:
    with open(path) as fh:
        payload = json.load(fh)
    model = ModelSpec.from_dict(payload["spec"])
    params = ParamVector(np.array(payload["theta"]), np.array(payload["beta"]))
    extra = {k: v for k, v in payload.items() if k not in ("spec", "theta", "beta")}
    return model, params, extra
