import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import anchortram as at
from anchortram.distributions import DISTRIBUTIONS

from helpers import bisect_root

ALL = list(DISTRIBUTIONS.values())
GRID = np.linspace(-3.0, 3.0, 25)


@pytest.mark.parametrize("dist,z,expected", [
    (at.STD_NORMAL, 0.0, 0.5),
    (at.STD_LOGISTIC, 0.0, 0.5),
    (at.STD_MEV, 0.0, 1.0 - np.exp(-1.0)),
])
def test_cdf_at_zero(dist, z, expected):
    assert dist.cdf(z) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("dist,expected", [
    (at.STD_NORMAL, 1.0 / np.sqrt(2.0 * np.pi)),
    (at.STD_LOGISTIC, 0.25),
    (at.STD_MEV, np.exp(-1.0)),
])
def test_pdf_at_zero(dist, expected):
    assert dist.pdf(0.0) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_pdf_matches_cdf_derivative(dist):
    h = 1e-4
    fd = (dist.cdf(GRID + h) - dist.cdf(GRID - h)) / (2.0 * h)
    assert np.max(np.abs(dist.pdf(GRID) - fd)) <= 1e-6


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_pdf_prime_matches_pdf_derivative(dist):
    h = 1e-4
    fd = (dist.pdf(GRID + h) - dist.pdf(GRID - h)) / (2.0 * h)
    assert np.max(np.abs(dist.pdf_prime(GRID) - fd)) <= 1e-6


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_log_density_is_concave(dist):
    # second finite difference of the log density must be non-positive
    h = 1e-3
    second = dist.log_pdf(GRID + h) - 2.0 * dist.log_pdf(GRID) + dist.log_pdf(GRID - h)
    assert np.all(second <= 1e-10)


def test_normal_score_is_identity():
    assert np.allclose(at.STD_NORMAL.score(GRID), GRID)


def test_logistic_score_by_finite_difference():
    # -f'/f should agree with the derivative of -log f on the grid
    h = 1e-5
    z = np.arange(-3.0, 3.01, 1.0)
    fd = -(at.STD_LOGISTIC.log_pdf(z + h) - at.STD_LOGISTIC.log_pdf(z - h)) / (2.0 * h)
    assert np.max(np.abs(at.STD_LOGISTIC.score(z) - fd)) <= 1e-8
    assert np.allclose(at.STD_LOGISTIC.score(z), 2.0 * at.STD_LOGISTIC.cdf(z) - 1.0)


def test_mev_score_by_finite_difference():
    h = 1e-5
    z = np.arange(-3.0, 3.01, 1.0)
    fd = -(at.STD_MEV.log_pdf(z + h) - at.STD_MEV.log_pdf(z - h)) / (2.0 * h)
    assert np.max(np.abs(at.STD_MEV.score(z) - fd)) <= 1e-7
    assert np.allclose(at.STD_MEV.score(z), np.exp(z) - 1.0)


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_score_deriv_by_finite_difference(dist):
    h = 1e-5
    fd = (dist.score(GRID + h) - dist.score(GRID - h)) / (2.0 * h)
    assert np.max(np.abs(dist.score_deriv(GRID) - fd)) <= 1e-6


def test_quantile_fixed_points():
    assert at.STD_LOGISTIC.quantile(0.5) == 0.0
    assert at.STD_MEV.quantile(1.0 - np.exp(-1.0)) == pytest.approx(0.0, abs=1e-12)
    # derived via an independent bisection oracle on the cdf
    oracle = bisect_root(lambda z: at.STD_NORMAL.cdf(z) - 0.975, -10.0, 10.0)
    assert oracle == pytest.approx(1.959964, abs=1e-6)
    assert at.STD_NORMAL.quantile(0.975) == pytest.approx(oracle, abs=1e-9)


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_quantile_domain_error(dist):
    for bad in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            dist.quantile(bad)


@pytest.mark.parametrize("dist,zmax", [(at.STD_NORMAL, 5.7), (at.STD_LOGISTIC, 8.0), (at.STD_MEV, 2.7)],
                         ids=["normal", "logistic", "mev"])
def test_quantile_cdf_roundtrip(dist, zmax):
    # zmax is where one ulp of the cdf near 1.0 still maps to under 1e-8 in
    # z; past it the roundtrip is limited by double precision, not by the
    # implementation
    z = np.linspace(-8.0, zmax, 60)
    assert np.max(np.abs(dist.quantile(dist.cdf(z)) - z)) <= 1e-8


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_cdf_of_quantile_identity(dist):
    p = np.concatenate([np.geomspace(1e-10, 0.5, 30), 1.0 - np.geomspace(1e-10, 0.5, 30)])
    assert np.max(np.abs(dist.cdf(dist.quantile(p)) - p)) <= 1e-10


@pytest.mark.parametrize("dist", ALL, ids=lambda d: d.name)
def test_cdf_monotone_and_in_unit_interval(dist):
    z = np.linspace(-30.0, 30.0, 300)
    c = dist.cdf(z)
    assert np.all(np.diff(c) >= 0.0)
    assert np.all((c >= 0.0) & (c <= 1.0))
    assert dist.cdf(-40.0) <= 1e-12
    assert dist.cdf(40.0) >= 1.0 - 1e-12


def test_stable_log_tails():
    # the complementary forms stay exact where naive composition underflows
    assert at.STD_MEV.log_sf(5.0) == pytest.approx(-np.exp(5.0), rel=1e-15)
    assert at.STD_LOGISTIC.log_sf(40.0) == pytest.approx(-40.0, rel=1e-10)
    # asymptotic expansion of the normal upper tail as an oracle
    z = 35.0
    asym = -0.5 * z * z - np.log(z * np.sqrt(2.0 * np.pi)) + np.log1p(-1.0 / z**2)
    assert at.STD_NORMAL.log_sf(z) == pytest.approx(asym, rel=1e-4)
    assert at.STD_MEV.log_cdf(-600.0) == pytest.approx(-600.0, rel=1e-12)


@given(st.floats(-8.0, 8.0), st.floats(-8.0, 8.0))
@settings(max_examples=60, deadline=None)
def test_cdf_pairwise_monotone(z1, z2):
    lo, hi = min(z1, z2), max(z1, z2)
    for dist in ALL:
        assert dist.cdf(lo) <= dist.cdf(hi) + 1e-15


def test_registry_names():
    assert set(DISTRIBUTIONS) == {"normal", "logistic", "mev"}
    assert at.get_distribution("mev") is at.STD_MEV
    with pytest.raises(ValueError):
        at.get_distribution("cauchy")
