"""Response bases, their derivatives, and monotonicity constraints.

Three bases cover the model zoo: a linear basis ``(1, y)`` for location-scale
models, a Bernstein polynomial basis on a bounded support for smooth monotone
transformations, and a dummy basis for ordinal responses where the
transformation is a step function over cut levels.

Monotonicity is enforced through an unconstrained reparametrization: the
first free parameter is the first coefficient and every further coefficient
adds ``exp`` of a free parameter.  One first-order optimizer then serves all
model types.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Union

import numpy as np
from scipy import special

from .errors import ModelSpecError


class Constraint(Enum):
    POSITIVE_SLOPE = "positive_slope"
    MONOTONE_NONDECREASING = "monotone_nondecreasing"
    STRICTLY_INCREASING = "strictly_increasing"


@dataclass(frozen=True)
class LinearBasis:
    """Basis (1, y); the second coefficient is a positive slope."""

    kind = "linear"

    @property
    def dim(self) -> int:
        return 2

    @property
    def constraint(self) -> Constraint:
        return Constraint.POSITIVE_SLOPE


@dataclass(frozen=True)
class BernsteinBasis:
    """Bernstein polynomials of the given order on [lo, hi].

    Evaluation outside the support clips the response to the boundary, so
    the implied cdf is flat beyond the support ends.
    """

    order: int
    support: tuple[float, float]

    kind = "bernstein"

    def __post_init__(self):
        lo, hi = self.support
        if self.order < 1:
            raise ModelSpecError("Bernstein order must be at least 1")
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ModelSpecError("Bernstein support must be a finite interval with lo < hi")

    @property
    def dim(self) -> int:
        return self.order + 1

    @property
    def constraint(self) -> Constraint:
        return Constraint.MONOTONE_NONDECREASING


@dataclass(frozen=True)
class OrdinalBasis:
    """Dummy basis for an ordinal response with n_classes levels.

    There are n_classes - 1 free cut levels; the top cut is held at +inf, so
    class k maps to the unit vector e_k for k = 1..n_classes-1 and the top
    class is handled by the caller through right censoring.
    """

    n_classes: int

    kind = "ordinal"

    def __post_init__(self):
        if self.n_classes < 2:
            raise ModelSpecError("ordinal basis needs at least 2 classes")

    @property
    def dim(self) -> int:
        return self.n_classes - 1

    @property
    def constraint(self) -> Constraint:
        return Constraint.STRICTLY_INCREASING


BasisSpec = Union[LinearBasis, BernsteinBasis, OrdinalBasis]


def basis_to_dict(basis: BasisSpec) -> dict:
    if isinstance(basis, LinearBasis):
        return {"kind": "linear"}
    if isinstance(basis, BernsteinBasis):
        return {
            "kind": "bernstein",
            "order": basis.order,
            "support": [float(basis.support[0]), float(basis.support[1])],
        }
    if isinstance(basis, OrdinalBasis):
        return {"kind": "ordinal", "n_classes": basis.n_classes}
    raise ModelSpecError(f"unknown basis object {basis!r}")


def basis_from_dict(d: dict) -> BasisSpec:
    kind = d.get("kind")
    if kind == "linear":
        return LinearBasis()
    if kind == "bernstein":
        support = d.get("support")
        if support is None:
            raise ModelSpecError("bernstein basis needs an explicit support")
        return BernsteinBasis(order=int(d["order"]), support=(float(support[0]), float(support[1])))
    if kind == "ordinal":
        return OrdinalBasis(n_classes=int(d["n_classes"]))
    raise ModelSpecError(f"unknown basis kind {kind!r}")


def _bernstein_matrix(order: int, u: np.ndarray) -> np.ndarray:
    # rows: observations, columns: k = 0..order
    k = np.arange(order + 1)
    coef = special.comb(order, k)
    u = u[:, None]
    return coef * u**k * (1.0 - u) ** (order - k)


def _bernstein_deriv_matrix(order: int, u: np.ndarray, width: float) -> np.ndarray:
    lower = _bernstein_matrix(order - 1, u) if order >= 1 else np.zeros((len(u), 1))
    out = np.zeros((len(u), order + 1))
    # d/du B_{k,P} = P * (B_{k-1,P-1} - B_{k,P-1})
    out[:, 1:] += lower
    out[:, :-1] -= lower
    out *= order / width
    return out


def eval_basis(basis: BasisSpec, y) -> np.ndarray:
    """Basis matrix at the response values, shape (n, dim).

    Scalar input returns a 1-d vector of length dim.
    """
    scalar = np.isscalar(y) or (isinstance(y, np.ndarray) and y.ndim == 0)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(basis, LinearBasis):
        out = np.column_stack([np.ones_like(y), y])
    elif isinstance(basis, BernsteinBasis):
        lo, hi = basis.support
        u = np.clip((y - lo) / (hi - lo), 0.0, 1.0)
        out = _bernstein_matrix(basis.order, u)
    elif isinstance(basis, OrdinalBasis):
        levels = np.round(y).astype(int)
        if np.any(np.abs(y - levels) > 1e-8):
            raise ValueError("ordinal response values must be integral class levels")
        if np.any(levels < 1) or np.any(levels > basis.n_classes - 1):
            raise ValueError(
                "ordinal class level outside 1..K-1; the top class carries no "
                "finite cut and must be encoded as right censoring"
            )
        out = np.zeros((len(levels), basis.dim))
        out[np.arange(len(levels)), levels - 1] = 1.0
    else:
        raise ModelSpecError(f"unknown basis object {basis!r}")
    return out[0] if scalar else out


def eval_basis_deriv(basis: BasisSpec, y) -> np.ndarray:
    """Derivative in y of each basis component, shape (n, dim)."""
    scalar = np.isscalar(y) or (isinstance(y, np.ndarray) and y.ndim == 0)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(basis, LinearBasis):
        out = np.column_stack([np.zeros_like(y), np.ones_like(y)])
    elif isinstance(basis, BernsteinBasis):
        lo, hi = basis.support
        # constant boundary slope outside the support, matching eval_basis
        u = np.clip((y - lo) / (hi - lo), 0.0, 1.0)
        out = _bernstein_deriv_matrix(basis.order, u, hi - lo)
    elif isinstance(basis, OrdinalBasis):
        raise ValueError("the ordinal basis has no derivative in y")
    else:
        raise ModelSpecError(f"unknown basis object {basis!r}")
    return out[0] if scalar else out


def is_feasible(constraint: Constraint, theta) -> bool:
    """Pure feasibility predicate for a coefficient vector."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return False
    if constraint is Constraint.POSITIVE_SLOPE:
        return theta.shape == (2,) and theta[1] > 0.0
    diffs = np.diff(theta)
    if constraint is Constraint.MONOTONE_NONDECREASING:
        return bool(np.all(diffs >= 0.0))
    if constraint is Constraint.STRICTLY_INCREASING:
        return bool(np.all(diffs > 0.0))
    raise ValueError(constraint)


def reparam_to_feasible(constraint: Constraint, free) -> np.ndarray:
    """Map an unconstrained vector to a feasible coefficient vector.

    The map is smooth and reaches the interior of the feasible set: the first
    coefficient is free and each following one adds an exponentiated
    increment.
    """
    free = np.asarray(free, dtype=float)
    if constraint is Constraint.POSITIVE_SLOPE:
        if free.shape != (2,):
            raise ValueError("positive-slope constraint applies to 2 parameters")
        return np.array([free[0], np.exp(free[1])])
    out = np.empty_like(free)
    out[0] = free[0]
    if len(free) > 1:
        out[1:] = np.exp(free[1:])
    return np.cumsum(out)


def reparam_pullback(constraint: Constraint, free, grad_theta) -> np.ndarray:
    """Pull a gradient in coefficient space back to the free parameters."""
    free = np.asarray(free, dtype=float)
    grad_theta = np.asarray(grad_theta, dtype=float)
    if constraint is Constraint.POSITIVE_SLOPE:
        return np.array([grad_theta[0], np.exp(free[1]) * grad_theta[1]])
    # theta_k = free_0 + sum_{j<=k, j>=1} exp(free_j)
    tail = np.cumsum(grad_theta[::-1])[::-1]
    out = np.empty_like(free)
    out[0] = tail[0]
    if len(free) > 1:
        out[1:] = np.exp(free[1:]) * tail[1:]
    return out


def inverse_reparam(constraint: Constraint, theta, min_increment: float = 1e-8) -> np.ndarray:
    """Free parameters reproducing theta; increments below min_increment are
    floored so strictness survives the round trip."""
    theta = np.asarray(theta, dtype=float)
    if constraint is Constraint.POSITIVE_SLOPE:
        return np.array([theta[0], np.log(max(theta[1], min_increment))])
    out = np.empty_like(theta)
    out[0] = theta[0]
    if len(theta) > 1:
        out[1:] = np.log(np.maximum(np.diff(theta), min_increment))
    return out


def theta_from_true_h(basis: BernsteinBasis, h: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Coefficients that interpolate a monotone transformation at evenly
    spaced grid points across the support."""
    if not isinstance(basis, BernsteinBasis):
        raise ModelSpecError("theta_from_true_h needs a Bernstein basis")
    lo, hi = basis.support
    grid = np.linspace(lo, hi, basis.dim)
    try:
        theta = np.asarray(h(grid), dtype=float)
        if theta.shape != grid.shape:
            raise TypeError
    except TypeError:
        theta = np.array([float(h(g)) for g in grid])
    if not np.all(np.isfinite(theta)):
        raise ValueError("transformation evaluates to non-finite values on the support grid")
    if np.any(np.diff(theta) < 0.0):
        raise ValueError("transformation is not non-decreasing on the support grid")
    return theta
