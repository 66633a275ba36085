"""Reference distributions on the transformation scale.

Each distribution exposes the calculus needed by censored log-likelihoods:
cdf, density, log-density, density derivative, numerically stable log-cdf and
log-survival, the score ``-f'(z)/f(z)`` with its derivative, and the quantile
function.  All densities are log-concave, so the score is non-decreasing.

Log-probabilities of censored branches are computed from the complementary
forms directly (for instance the log-survival of the minimum extreme value
distribution is exactly ``-exp(z)``) instead of composing ``log`` with the
cdf, which would underflow deep in the tails.  Probability clamping is the
likelihood assembler's job, not ours; the primitives here stay exact.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
# exp() saturates silently past this point instead of overflowing
_EXP_CAP = 700.0


class SimpleDistribution:
    """Stateless distribution used as the inverse link of a transformation
    model.  Subclasses are singletons; compare by identity."""

    name: str = ""

    def cdf(self, z):
        raise NotImplementedError

    def log_cdf(self, z):
        raise NotImplementedError

    def log_sf(self, z):
        """log(1 - cdf(z)), stable in the upper tail."""
        raise NotImplementedError

    def log_pdf(self, z):
        raise NotImplementedError

    def pdf(self, z):
        return np.exp(self.log_pdf(z))

    def score(self, z):
        """-f'(z)/f(z), the exact-observation score residual."""
        raise NotImplementedError

    def score_deriv(self, z):
        """Derivative of score(z); non-negative by log-concavity."""
        raise NotImplementedError

    def pdf_prime(self, z):
        # f' = -f * score for every member of the family
        return -self.pdf(z) * self.score(z)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("quantile level must lie strictly in (0, 1)")
        return self._quantile(p)

    def _quantile(self, p):
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class StdNormal(SimpleDistribution):
    name = "normal"

    def cdf(self, z):
        return special.ndtr(z)

    def log_cdf(self, z):
        return special.log_ndtr(z)

    def log_sf(self, z):
        return special.log_ndtr(-np.asarray(z, dtype=float))

    def log_pdf(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * z * z - _LOG_SQRT_2PI

    def score(self, z):
        return np.asarray(z, dtype=float)

    def score_deriv(self, z):
        return np.ones_like(np.asarray(z, dtype=float))

    def _quantile(self, p):
        return special.ndtri(p)

    def sample(self, rng, n):
        return rng.standard_normal(n)


class StdLogistic(SimpleDistribution):
    name = "logistic"

    def cdf(self, z):
        return special.expit(z)

    def log_cdf(self, z):
        return special.log_expit(z)

    def log_sf(self, z):
        return special.log_expit(-np.asarray(z, dtype=float))

    def log_pdf(self, z):
        z = np.asarray(z, dtype=float)
        return special.log_expit(z) + special.log_expit(-z)

    def score(self, z):
        # 2*cdf(z) - 1, evaluated without cancellation
        return np.tanh(np.asarray(z, dtype=float) / 2.0)

    def score_deriv(self, z):
        return 2.0 * self.pdf(z)

    def _quantile(self, p):
        return special.logit(p)

    def sample(self, rng, n):
        return rng.logistic(0.0, 1.0, n)


class StdMEV(SimpleDistribution):
    """Standard minimum extreme value distribution,
    F(z) = 1 - exp(-exp(z))."""

    name = "mev"

    @staticmethod
    def _w(z):
        return np.exp(np.minimum(np.asarray(z, dtype=float), _EXP_CAP))

    def cdf(self, z):
        return -np.expm1(-self._w(z))

    def log_cdf(self, z):
        z = np.asarray(z, dtype=float)
        w = self._w(z)
        # for tiny w, log(1 - exp(-w)) = log(w) + log(1 - w/2 + ...)
        small = w < 1e-8
        with np.errstate(divide="ignore"):
            main = np.log(-np.expm1(-np.maximum(w, 1e-10)))
        return np.where(small, z - w / 2.0, main)

    def log_sf(self, z):
        return -self._w(z)

    def log_pdf(self, z):
        z = np.asarray(z, dtype=float)
        return z - self._w(z)

    def score(self, z):
        # exp(z) - 1
        return np.expm1(np.minimum(np.asarray(z, dtype=float), _EXP_CAP))

    def score_deriv(self, z):
        return self._w(z)

    def _quantile(self, p):
        return np.log(-np.log1p(-p))

    def sample(self, rng, n):
        # minimum extreme value = negated (maximum) Gumbel
        return -rng.gumbel(0.0, 1.0, n)


STD_NORMAL = StdNormal()
STD_LOGISTIC = StdLogistic()
STD_MEV = StdMEV()

DISTRIBUTIONS = {
    d.name: d for d in (STD_NORMAL, STD_LOGISTIC, STD_MEV)
}


def get_distribution(name: str) -> SimpleDistribution:
    try:
        return DISTRIBUTIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown distribution {name!r}; expected one of "
            f"{sorted(DISTRIBUTIONS)}"
        ) from None
