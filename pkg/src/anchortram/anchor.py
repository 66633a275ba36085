"""Anchor projection and the two anchor losses.

The projection maps onto the span of an intercept plus the column-centered
anchors, so the penalty only sees anchor-explained variation of the score
residuals.  Discrete anchors should be one-hot encoded before projection;
any coding spanning the same column space yields the same penalty because
only the subspace matters.

The distributional anchor loss is

    L(params; data, xi) = -loglik/n + xi * ||P r||^2 / n

with r the score residuals at the current parameters.  For the normal linear
model this reduces to the classical squared-error anchor objective with
regularization gamma = 2 xi + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import reparam_pullback, reparam_to_feasible
from .errors import DegenerateProjectionError
from .tram import Dataset, ModelSpec, _prepare, _quantities, _grad_theta_beta

_SV_RTOL = 1e-10


@dataclass(frozen=True)
class AnchorProjection:
    """Orthogonal projector onto span{1, centered anchor columns}, stored as
    an orthonormal basis of the column space."""

    q_basis: np.ndarray

    @property
    def n(self) -> int:
        return self.q_basis.shape[0]

    @property
    def rank(self) -> int:
        return self.q_basis.shape[1]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.q_basis @ (self.q_basis.T @ v)


def build_projection(A: np.ndarray) -> AnchorProjection:
    """Factorize the projector for an anchor matrix.

    Rank-deficient anchors (duplicate or collinear columns) are handled by
    dropping singular values below a relative threshold.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, q = A.shape
    if n <= q + 1:
        raise DegenerateProjectionError(
            f"need more rows than anchor columns plus intercept (n={n}, q={q})"
        )
    M = np.column_stack([np.ones(n), A - A.mean(axis=0, keepdims=True)])
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    keep = s > _SV_RTOL * s[0]
    return AnchorProjection(np.ascontiguousarray(U[:, keep]))


@dataclass(frozen=True)
class AnchorLossValue:
    nll_term: float
    penalty_term: float
    total: float

    @classmethod
    def make(cls, nll_term: float, penalty_term: float) -> "AnchorLossValue":
        return cls(nll_term, penalty_term, nll_term + penalty_term)


def _loss_and_grad(model: ModelSpec, free: np.ndarray, ws, projection, xi: float,
                   include_grad: bool = True):
    """Distributional anchor loss and its gradient in the free parameters.

    The penalty gradient differentiates through the residuals: with u = P r,
    d penalty = (2 xi / n) u' (dr/d params).
    """
    free = np.asarray(free, dtype=float)
    d = model.theta_dim
    theta = reparam_to_feasible(model.constraint, free[:d])
    beta = free[d:]
    q = _quantities(model, theta, beta, ws)
    n = ws.n
    nll = -float(np.sum(q.ll)) / n
    if xi > 0.0:
        u = projection.apply(q.resid)
        penalty = xi * float(u @ u) / n
    else:
        u = None
        penalty = 0.0
    value = AnchorLossValue.make(nll, penalty)
    if not include_grad:
        return value, None
    g_theta, g_beta = _grad_theta_beta(ws, q)
    g_theta = -g_theta / n
    g_beta = -g_beta / n
    if xi > 0.0:
        scale = 2.0 * xi / n
        w_lo = u * q.dw_lo
        w_hi = u * q.dw_hi
        g_theta += scale * (ws.B_LO.T @ w_lo + ws.B_HI.T @ w_hi)
        g_beta -= scale * (ws.X.T @ (w_lo + w_hi))
    grad = np.concatenate([reparam_pullback(model.constraint, free[:d], g_theta), g_beta])
    return value, grad


def anchor_loss(model: ModelSpec, free_params, data: Dataset, xi: float) -> AnchorLossValue:
    """Distributional anchor loss at unconstrained parameters."""
    if xi < 0.0:
        raise ValueError("xi must be non-negative")
    ws = _prepare(model, data)
    projection = build_projection(data.A) if xi > 0.0 else None
    value, _ = _loss_and_grad(model, np.asarray(free_params, dtype=float), ws, projection, xi,
                              include_grad=False)
    return value


def l2_anchor_loss(beta, y, X, A, gamma: float) -> float:
    """Squared-error anchor objective,
    ||(I - P)(y - X beta)||^2 / n + gamma ||P (y - X beta)||^2 / n."""
    if gamma < 0.0:
        raise ValueError("gamma must be non-negative")
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    e = y - X @ np.asarray(beta, dtype=float)
    pe = build_projection(A).apply(e)
    n = len(y)
    plain = e - pe
    return float(plain @ plain + gamma * (pe @ pe)) / n


def closed_form_linear_anchor(y, X, A, gamma: float, intercept: bool = True) -> np.ndarray:
    """Exact minimizer of the squared-error anchor objective.

    Obtained by ordinary least squares on the transformed variables
    v + (sqrt(gamma) - 1) P v.  With intercept=True a leading intercept
    column is added and its coefficient returned first.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be non-negative")
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
    projection = build_projection(A)
    scale = np.sqrt(gamma) - 1.0

    def transform(v):
        return v + scale * projection.apply(v)

    Xt = transform(X)
    yt = transform(y)
    coef, _, rank, _ = np.linalg.lstsq(Xt, yt, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError("singular transformed design")
    return coef


def residual_anchor_correlation(r, A) -> float:
    """Largest absolute correlation between a residual vector and any anchor
    column.  Constant anchor columns carry no association and are skipped."""
    r = np.asarray(r, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rc = r - r.mean()
    r_norm = np.linalg.norm(rc)
    if r_norm == 0.0:
        raise ValueError("residual vector has zero variance")
    Ac = A - A.mean(axis=0, keepdims=True)
    col_norms = np.linalg.norm(Ac, axis=0)
    best = 0.0
    for j in range(A.shape[1]):
        if col_norms[j] == 0.0:
            continue
        best = max(best, abs(float(rc @ Ac[:, j])) / (r_norm * col_norms[j]))
    return min(best, 1.0)
