"""Shared builders and oracles for the test suite.

Oracles here are deliberately independent of the library internals: finite
differences, brute-force bisection and closed-form textbook quantities.
"""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.stats import chi2

import anchortram as at
from anchortram.tram import params_from_free


def finite_diff(fun, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for j in range(len(x)):
        step = h * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = step
        out[j] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return out


def bisect_root(fun, lo, hi, tol=1e-12, iters=200):
    """Plain scalar bisection for an increasing function."""
    flo = fun(lo)
    if flo > 0:
        raise ValueError("no sign change")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fun(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def mixed_kinds(y, rng, widths=0.8):
    """Assign a censoring kind mix to exact draws: roughly 55% exact,
    15% each of left/right/interval."""
    n = len(y)
    u = rng.random(n)
    lower = y.copy()
    upper = y.copy()
    kind = np.zeros(n, dtype=np.int8)
    left = u < 0.15
    right = (u >= 0.15) & (u < 0.30)
    inter = (u >= 0.30) & (u < 0.45)
    lower[left] = -np.inf
    kind[left] = 1
    upper[right] = np.inf
    kind[right] = 2
    lower[inter] = y[inter] - widths * rng.random(int(inter.sum()))
    upper[inter] = y[inter] + widths * rng.random(int(inter.sum())) + 1e-3
    kind[inter] = 3
    return lower, upper, kind


def lm_instance(seed=0, n=200, p=2, censored=False):
    """Normal linear data with anchors correlated with X."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, 1))
    X = 0.6 * A + rng.standard_normal((n, p))
    beta = np.linspace(0.5, 1.0, p)
    y = 0.4 + X @ beta + 0.8 * rng.standard_normal(n)
    if censored:
        lower, upper, kind = mixed_kinds(y, rng)
        data = at.Dataset(lower, upper, kind, X, A)
    else:
        data = at.exact_dataset(y, X, A)
    return at.lm_model(p), data


def c_probit_instance(seed=0, n=400, censored=False, order=5):
    """Chi-squared shaped response through a probit-scale transformation."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, 1))
    X = 0.5 * A + rng.standard_normal((n, 1))
    lin = 0.4 * X[:, 0]
    z = rng.standard_normal(n)
    y = chi2.ppf(special.ndtr(z + lin), 3)
    if censored:
        lower, upper, kind = mixed_kinds(y, rng, widths=0.5)
        data = at.Dataset(lower, upper, kind, X, A)
    else:
        data = at.exact_dataset(y, X, A)
    support = at.bernstein_support_from_data(lower_finite(data))
    return at.c_probit_model(1, order, support), data


def lower_finite(data):
    vals = np.concatenate([data.y_lower[np.isfinite(data.y_lower)],
                           data.y_upper[np.isfinite(data.y_upper)]])
    return vals


def c_logit_instance(seed=0, n=400, censored=False, order=5):
    """Logistic-link continuous response on (0, 10)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, 1))
    X = 0.5 * A + rng.standard_normal((n, 1))
    lin = 0.5 * X[:, 0]
    z = rng.logistic(size=n)
    y = 10.0 * special.expit(0.8 * (z + lin))
    if censored:
        lower, upper, kind = mixed_kinds(y, rng, widths=0.5)
        data = at.Dataset(lower, upper, kind, X, A)
    else:
        data = at.exact_dataset(y, X, A)
    support = at.bernstein_support_from_data(lower_finite(data))
    return at.c_logit_model(1, order, support), data


def o_logit_instance(seed=0, n=400, k=5, beta=0.6):
    """Proportional-odds ordinal data from evenly spaced latent cuts."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, 1))
    X = 0.5 * A + rng.standard_normal((n, 1))
    cuts = special.logit(np.arange(1, k) / k)
    w = rng.logistic(size=n) + beta * X[:, 0]
    classes = 1 + np.searchsorted(cuts, w, side="left")
    data = at.ordinal_dataset(classes, k, X, A)
    return at.o_logit_model(1, k), data


ALL_INSTANCES = {
    "lm": lm_instance,
    "c-probit": c_probit_instance,
    "c-logit": c_logit_instance,
    "o-logit": o_logit_instance,
}


def feasible_free(model, seed=0, scale=0.3):
    """A random unconstrained parameter vector near a sane baseline."""
    rng = np.random.default_rng(seed)
    free = scale * rng.standard_normal(model.free_dim)
    return free


def params_of(model, free):
    return params_from_free(model, free)
