"""Evaluation metrics and protocols.

The negative log-likelihood is the primary score: it is proper, applies to
censored and ordinal responses alike, and its upper quantiles expose the
hard-to-predict tail that causal regularization is meant to protect.
Absolute prediction error against the conditional median complements it for
continuous models.

Leave-one-environment-out cross validation fits a regularization path on all
environments but one, using one-hot environment indicators of the training
fold as anchors, and scores the held-out environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .basis import BernsteinBasis, LinearBasis, OrdinalBasis
from .errors import UnsupportedMetricError
from .optim import FitConfig, FitResult, fit_path
from .tram import Dataset, EXACT, ModelSpec, ParamVector, cdf_conditional, loglik_contributions

QUANTILE_LEVELS = (0.5, 0.7, 0.9, 0.95, 0.99, 1.0)


def nll_contributions(model: ModelSpec, params: ParamVector, test: Dataset) -> np.ndarray:
    """Per-row negative log-likelihood contributions."""
    return -loglik_contributions(model, params, test)


def _quantiles(values: np.ndarray, levels: Sequence[float]) -> dict[float, float]:
    # type-7 estimator, linear interpolation of order statistics
    return {
        float(a): float(np.quantile(values, a, method="linear")) for a in levels
    }


@dataclass
class MetricReport:
    mean_nll: float
    nll_quantiles: dict[float, float]
    n_test: int
    ape_quantiles: Optional[dict[float, float]] = None


def metric_report(
    model: ModelSpec,
    params: ParamVector,
    test: Dataset,
    include_ape: bool = False,
    levels: Sequence[float] = QUANTILE_LEVELS,
) -> MetricReport:
    nll = nll_contributions(model, params, test)
    report = MetricReport(
        mean_nll=float(np.mean(nll)),
        nll_quantiles=_quantiles(nll, levels),
        n_test=test.n,
    )
    if include_ape:
        report.ape_quantiles = _quantiles(ape(model, params, test), levels)
    return report


def conditional_median(model: ModelSpec, params: ParamVector, X: np.ndarray,
                       tol: float = 1e-8) -> np.ndarray:
    """Median of each conditional distribution, found by bisection.

    For the linear basis the bracket is centered on the closed-form solution;
    for a Bernstein basis the support brackets the root and the median is
    clamped to the support ends when the cdf never crosses one half there.
    """
    if isinstance(model.basis, OrdinalBasis):
        raise UnsupportedMetricError("conditional median is not defined for ordinal models")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    shift = X @ params.beta
    z_half = float(model.dist.quantile(0.5))
    if isinstance(model.basis, LinearBasis):
        center = (z_half - params.theta[0] + shift) / params.theta[1]
        half_width = 4.0 / params.theta[1]
        lo = center - half_width
        hi = center + half_width
    else:
        lo = np.full(n, model.basis.support[0])
        hi = np.full(n, model.basis.support[1])

    # h(y) - x'beta = z_half, h monotone: bisect on g(y) = b(y)'theta - shift
    from .basis import eval_basis

    def g(y):
        return eval_basis(model.basis, y) @ params.theta - shift

    g_lo = g(lo)
    g_hi = g(hi)
    out = np.empty(n)
    # the cdf is flat beyond the support, so medians outside it are reported
    # at the nearest support end
    below = g_lo >= z_half
    above = g_hi <= z_half
    out[below] = lo[below]
    out[above] = hi[above]
    active = ~(below | above)
    a, b = lo.copy(), hi.copy()
    for _ in range(200):
        if not active.any():
            break
        mid = 0.5 * (a + b)
        low = g(mid) < z_half
        a = np.where(active & low, mid, a)
        b = np.where(active & ~low, mid, b)
        done = (b - a) < tol
        mid_done = active & done
        out[mid_done] = 0.5 * (a + b)[mid_done]
        active &= ~done
    out[active] = 0.5 * (a + b)[active]
    return out


def ape(model: ModelSpec, params: ParamVector, test: Dataset) -> np.ndarray:
    """Absolute prediction error |y - conditional median| for exact
    continuous responses."""
    if isinstance(model.basis, OrdinalBasis):
        raise UnsupportedMetricError("absolute prediction error is not defined for ordinal models")
    if not np.all(test.kind == EXACT):
        raise UnsupportedMetricError("absolute prediction error needs exact responses")
    med = conditional_median(model, params, test.X)
    return np.abs(test.y_lower - med)


@dataclass
class LoeoFold:
    env: object
    xi_grid: list[float]
    mean_nll: list[float]
    coefficients: list[np.ndarray]
    n_held_out: int


@dataclass
class LoeoResult:
    folds: list[LoeoFold] = field(default_factory=list)


def _one_hot(labels: np.ndarray, levels: np.ndarray) -> np.ndarray:
    out = np.zeros((len(labels), len(levels)))
    for j, lev in enumerate(levels):
        out[:, j] = labels == lev
    return out


def loeo_cv(
    model: ModelSpec,
    data: Dataset,
    env_column: np.ndarray,
    xi_grid,
    cfg: Optional[FitConfig] = None,
) -> LoeoResult:
    """Leave-one-environment-out cross validation over a regularization grid.

    Anchors of each training fold are the one-hot indicators of the fold's
    own environments, so a level seen only in the held-out fold never enters
    the projector.  A constant environment column degenerates to plain
    train-equals-test evaluation.
    """
    env_column = np.asarray(env_column)
    if len(env_column) != data.n:
        raise ValueError("environment column must align with the dataset rows")
    xi_grid = [float(x) for x in xi_grid]
    levels = np.unique(env_column)
    result = LoeoResult()
    all_rows = np.arange(data.n)
    if len(levels) == 1:
        # constant environment column: plain evaluation with train == test
        folds = [(levels[0], all_rows, all_rows)]
    elif len(levels) < 3:
        raise ValueError("leave-one-environment-out needs at least 3 environments")
    else:
        folds = [
            (lev, all_rows[env_column != lev], all_rows[env_column == lev]) for lev in levels
        ]
    for lev, train_rows, test_rows in folds:
        if len(test_rows) == 0:
            raise ValueError(f"environment {lev!r} has no rows")
        train_levels = np.unique(env_column[train_rows])
        anchors = _one_hot(env_column[train_rows], train_levels)
        train = data.subset(train_rows).replace_anchors(anchors)
        held_out = data.subset(test_rows)
        fits = fit_path(model, train, xi_grid, cfg)
        mean_nll = [float(np.mean(nll_contributions(model, f.params, held_out))) for f in fits]
        result.folds.append(
            LoeoFold(
                env=lev.item() if hasattr(lev, "item") else lev,
                xi_grid=list(xi_grid),
                mean_nll=mean_nll,
                coefficients=[f.params.beta.copy() for f in fits],
                n_held_out=len(test_rows),
            )
        )
    return result


def worst_case_curve(result: LoeoResult) -> dict[float, float]:
    """Pointwise maximum of the held-out mean negative log-likelihood over
    environments."""
    if not result.folds:
        raise ValueError("empty cross-validation result")
    grid = result.folds[0].xi_grid
    curve = {}
    for i, xi in enumerate(grid):
        curve[float(xi)] = max(f.mean_nll[i] for f in result.folds)
    return curve
