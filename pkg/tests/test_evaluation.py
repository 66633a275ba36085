import numpy as np
import pytest
from scipy import special
from scipy.stats import chi2

import anchortram as at
from anchortram.errors import UnsupportedMetricError
from anchortram.evaluation import QUANTILE_LEVELS

from helpers import c_probit_instance, lm_instance, o_logit_instance

CFG = at.FitConfig(epochs=25000, full_batch=True)


def test_nll_single_exact_row():
    m = at.lm_model(0)
    params = at.ParamVector(np.array([0.0, 1.0]), np.zeros(0))
    data = at.exact_dataset(np.array([0.0]))
    assert at.nll_contributions(m, params, data)[0] == pytest.approx(0.9189385332046727, abs=1e-12)


def test_nll_right_censored_with_full_survival():
    m = at.lm_model(0)
    params = at.ParamVector(np.array([0.0, 1.0]), np.zeros(0))
    # survival at h = -8 is essentially one, so the contribution vanishes
    data = at.Dataset(np.array([-8.0]), np.array([np.inf]), np.array([2], dtype=np.int8),
                      np.zeros((1, 0)), np.zeros((1, 0)))
    assert at.nll_contributions(m, params, data)[0] <= 1e-12


def test_mean_nll_matches_gaussian_entropy_at_truth():
    rng = np.random.default_rng(5)
    n = 10_000
    sigma = 0.8
    y = sigma * rng.standard_normal(n)
    data = at.exact_dataset(y)
    m = at.lm_model(0)
    truth = at.ParamVector(np.array([0.0, 1.0 / sigma]), np.zeros(0))
    nll = at.nll_contributions(m, truth, data)
    entropy = 0.5 * np.log(2.0 * np.pi * np.e * sigma**2)
    assert abs(float(np.mean(nll)) - entropy) <= 3.0 * float(np.std(nll)) / np.sqrt(n)


def test_metric_report_quantiles_monotone():
    model, data = lm_instance(seed=1, n=200)
    fit = at.fit_mle(model, data, CFG)
    rep = at.metric_report(model, fit.params, data, include_ape=True)
    levels = list(rep.nll_quantiles)
    assert levels == sorted(levels)
    vals = [rep.nll_quantiles[a] for a in levels]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert rep.nll_quantiles[1.0] == pytest.approx(float(np.max(at.nll_contributions(model, fit.params, data))))
    assert rep.mean_nll == pytest.approx(float(np.mean(at.nll_contributions(model, fit.params, data))))
    assert rep.n_test == data.n
    ape_vals = [rep.ape_quantiles[a] for a in levels]
    assert all(b >= a for a, b in zip(ape_vals, ape_vals[1:]))


def test_quantile_estimator_is_type7():
    # hand-computed type-7 value: h = (n-1) alpha = 2.1 lands between the
    # third and fourth order statistics
    from anchortram.evaluation import _quantiles

    vals = np.array([1.0, 2.0, 3.0, 10.0])
    out = _quantiles(vals, [0.7])
    assert out[0.7] == pytest.approx(3.0 + 0.1 * (10.0 - 3.0), abs=1e-12)


def test_ape_lm_equals_absolute_residual():
    model, data = lm_instance(seed=2, n=200)
    fit = at.fit_mle(model, data, CFG)
    theta, beta = fit.params.theta, fit.params.beta
    sigma = 1.0 / theta[1]
    pred = -theta[0] * sigma + data.X @ (beta * sigma)
    expected = np.abs(data.y_lower - pred)
    assert np.max(np.abs(at.ape(model, fit.params, data) - expected)) <= 1e-6


def test_conditional_median_bisection_tolerance():
    model, data = c_probit_instance(seed=3, n=300)
    fit = at.fit_mle(model, data, CFG)
    med = at.conditional_median(model, fit.params, data.X)
    c = np.array([
        at.cdf_conditional(model, fit.params, med[i], data.X[i]) for i in range(30)
    ])
    assert np.max(np.abs(c - 0.5)) <= 1e-8


def test_conditional_median_symmetric_model():
    # symmetric transformation around y0 with zero shift: median is y0
    m = at.lm_model(1)
    params = at.ParamVector(np.array([-2.0, 4.0]), np.zeros(1))  # h(y) = 4 (y - 0.5)
    med = at.conditional_median(m, params, np.zeros((1, 1)))
    assert med[0] == pytest.approx(0.5, abs=1e-8)


def test_ape_rejects_ordinal_and_censored():
    model, data = o_logit_instance(seed=4)
    with pytest.raises(UnsupportedMetricError):
        at.ape(model, at.ParamVector(np.array([-1.0, 0.0, 1.0, 2.0]), np.zeros(1)), data)
    lm, lm_data = lm_instance(seed=5, n=50, censored=True)
    fit_params = at.ParamVector(np.array([0.0, 1.0]), np.zeros(2))
    with pytest.raises(UnsupportedMetricError):
        at.ape(lm, fit_params, lm_data)


# --- leave-one-environment-out -----------------------------------------------


def _env_data(seed=0, n_per=50, shift=3.0):
    rng = np.random.default_rng(seed)
    envs = np.repeat([1.0, 2.0, 3.0], n_per)
    X = rng.standard_normal((3 * n_per, 1))
    y = 1.2 * X[:, 0] + 0.4 * rng.standard_normal(3 * n_per)
    y[envs == 3.0] += shift
    data = at.exact_dataset(y, X, np.zeros((3 * n_per, 0)))
    return data, envs


def test_loeo_shifted_environment_is_hardest():
    data, envs = _env_data(seed=6)
    model = at.lm_model(1)
    res = at.loeo_cv(model, data, envs, [0.0], CFG)
    nll0 = {f.env: f.mean_nll[0] for f in res.folds}
    assert nll0[3.0] > nll0[1.0] and nll0[3.0] > nll0[2.0]


def test_loeo_folds_partition_rows():
    data, envs = _env_data(seed=7)
    res = at.loeo_cv(model=at.lm_model(1), data=data, env_column=envs, xi_grid=[0.0], cfg=CFG)
    assert sum(f.n_held_out for f in res.folds) == data.n
    assert sorted(f.env for f in res.folds) == [1.0, 2.0, 3.0]


def test_loeo_single_xi_zero_equals_plain_fit():
    data, envs = _env_data(seed=8)
    model = at.lm_model(1)
    res = at.loeo_cv(model, data, envs, [0.0], CFG)
    fold = next(f for f in res.folds if f.env == 1.0)
    train = data.subset(np.where(envs != 1.0)[0])
    held = data.subset(np.where(envs == 1.0)[0])
    fit = at.fit_mle(model, train, CFG)
    manual = float(np.mean(at.nll_contributions(model, fit.params, held)))
    assert fold.mean_nll[0] == pytest.approx(manual, abs=1e-6)


def test_loeo_constant_environments_degenerates_to_plain_evaluation():
    data, _ = _env_data(seed=9)
    envs = np.zeros(data.n)
    model = at.lm_model(1)
    res = at.loeo_cv(model, data, envs, [0.0], CFG)
    assert len(res.folds) == 1
    fit = at.fit_mle(model, data, CFG)
    manual = float(np.mean(at.nll_contributions(model, fit.params, data)))
    assert res.folds[0].mean_nll[0] == pytest.approx(manual, abs=1e-6)


def test_loeo_two_environments_rejected():
    data, envs = _env_data(seed=10)
    envs = np.where(envs == 3.0, 2.0, envs)
    with pytest.raises(ValueError):
        at.loeo_cv(at.lm_model(1), data, envs, [0.0], CFG)


def test_worst_case_curve():
    data, envs = _env_data(seed=11)
    model = at.lm_model(1)
    res = at.loeo_cv(model, data, envs, [0.0, 10.0], CFG)
    curve = at.worst_case_curve(res)
    assert set(curve) == {0.0, 10.0}
    for i, xi in enumerate([0.0, 10.0]):
        assert curve[xi] == pytest.approx(max(f.mean_nll[i] for f in res.folds))
    single = at.LoeoResult(folds=[res.folds[0]])
    one = at.worst_case_curve(single)
    assert one[0.0] == res.folds[0].mean_nll[0]


def test_worst_case_flat_when_anchors_uninformative():
    rng = np.random.default_rng(12)
    n = 240
    envs = np.repeat([1.0, 2.0, 3.0], n // 3)
    rng.shuffle(envs)
    X = rng.standard_normal((n, 1))
    y = 0.8 * X[:, 0] + 0.3 * rng.standard_normal(n)
    data = at.exact_dataset(y, X, np.zeros((n, 0)))
    model = at.lm_model(1)
    res = at.loeo_cv(model, data, envs, [0.0, 1.0], CFG)
    for fold in res.folds:
        assert abs(fold.mean_nll[1] - fold.mean_nll[0]) <= 0.05


def test_proper_scoring_true_model_wins():
    # data from a skewed transformation model: the flexible true-form model
    # must beat the misspecified location-scale fit on fresh draws
    wins = 0
    seeds = range(10)
    for seed in seeds:
        rng = np.random.default_rng(1000 + seed)
        n = 1500
        z = rng.standard_normal(n)
        y = chi2.ppf(special.ndtr(z), 3)
        X = rng.standard_normal((n, 1))
        data = at.exact_dataset(y, X, rng.standard_normal((n, 1)))
        support = (float(chi2.ppf(0.001, 3)), float(chi2.ppf(0.999, 3)))
        good = at.c_probit_model(1, 6, support)
        bad = at.lm_model(1)
        fit_good = at.fit_mle(good, data, CFG)
        fit_bad = at.fit_mle(bad, data, CFG)
        if (np.mean(at.nll_contributions(good, fit_good.params, data))
                < np.mean(at.nll_contributions(bad, fit_bad.params, data))):
            wins += 1
    assert wins >= 9
