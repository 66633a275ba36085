"""Desk-scale reproduction experiments over the named scenarios.

Each replicate simulates a scenario, fits a warm-started regularization
path and reports long-format metric rows.  Replicates are independent and
may run in a bounded worker pool; per-replicate seeds derive from the
master seed, so results do not depend on scheduling.

Row schema: scenario, seed, xi, m_x, do_level, metric, alpha, value.  The
knob columns stay empty where they do not apply.  Metrics include mean and
quantile negative log-likelihood on the intervened test set, the same on an
unperturbed test set (suffix ``_plain``), shift-coefficient estimates,
residual-anchor correlation on the training data, and for the linear
scenario the absolute-prediction-error quantiles of the closed-form
squared-error path.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .anchor import closed_form_linear_anchor, residual_anchor_correlation
from .evaluation import QUANTILE_LEVELS, metric_report, nll_contributions
from .optim import FitConfig, fit_path
from .sem import ScenarioConfig, make_scenario
from .errors import ScenarioError
from .tram import (
    bernstein_support_from_data,
    c_probit_model,
    lm_model,
    o_logit_model,
    score_residuals,
)

DEFAULT_XI_GRID = (0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e6)
DEFAULT_REPLICATES = {"la": 100, "nla": 100, "iv1": 100, "iv2": 200}

# full-batch fits stop early on the gradient tolerance; the epoch count is
# only a cap
DEFAULT_FIT = FitConfig(epochs=30_000, full_batch=True)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    replicates: Optional[int] = None
    seed: int = 0
    xi_grid: tuple = DEFAULT_XI_GRID
    workers: int = 1
    fit: FitConfig = field(default_factory=lambda: DEFAULT_FIT)
    iv2_m_x_values: tuple = (-1.0, 0.5, 1.0)
    iv2_do_levels: tuple = (0.0, 1.0, 1.8, 3.0)
    iv2_k_classes: int = 10

    def __post_init__(self):
        if self.experiment not in DEFAULT_REPLICATES:
            raise ScenarioError(f"unknown experiment {self.experiment!r}")

    @property
    def n_replicates(self) -> int:
        return self.replicates or DEFAULT_REPLICATES[self.experiment]


def _row(scenario, seed, xi, metric, value, alpha="", m_x="", do_level=""):
    return {
        "scenario": scenario,
        "seed": int(seed),
        "xi": xi,
        "m_x": m_x,
        "do_level": do_level,
        "metric": metric,
        "alpha": alpha,
        "value": float(value),
    }


def _report_rows(scenario, seed, xi, model, params, test, suffix="", **knobs):
    rep = metric_report(model, params, test)
    rows = [_row(scenario, seed, xi, "mean_nll" + suffix, rep.mean_nll, **knobs)]
    for a, v in rep.nll_quantiles.items():
        rows.append(_row(scenario, seed, xi, "nll_quantile" + suffix, v, alpha=a, **knobs))
    return rows


def _beta_rows(scenario, seed, xi, params, **knobs):
    return [
        _row(scenario, seed, xi, f"beta_{j + 1}", b, **knobs)
        for j, b in enumerate(params.beta)
    ]


def replicate_la(seed: int, xi_grid=DEFAULT_XI_GRID, fit_cfg: FitConfig = DEFAULT_FIT) -> list[dict]:
    bundle = make_scenario(ScenarioConfig("la", seed=seed))
    model = lm_model(bundle.train.p)
    fits = fit_path(model, bundle.train, xi_grid, fit_cfg)
    rows = []
    for xi, fit in zip(xi_grid, fits):
        rows += _report_rows("la", seed, xi, model, fit.params, bundle.test)
        rows += _report_rows("la", seed, xi, model, fit.params, bundle.test_unperturbed,
                             suffix="_plain")
        rows += _beta_rows("la", seed, xi, fit.params)
        # closed-form squared-error path at the matching regularization level
        gamma = 2.0 * xi + 1.0
        coef = closed_form_linear_anchor(
            bundle.train.y_lower, bundle.train.X, bundle.train.A, gamma
        )
        pred = coef[0] + bundle.test.X @ coef[1:]
        ape_vals = np.abs(bundle.test.y_lower - pred)
        for a in QUANTILE_LEVELS:
            rows.append(
                _row("la", seed, xi, "ape_quantile_l2", np.quantile(ape_vals, a, method="linear"),
                     alpha=a)
            )
    return rows


def replicate_nla(seed: int, xi_grid=DEFAULT_XI_GRID, fit_cfg: FitConfig = DEFAULT_FIT) -> list[dict]:
    bundle = make_scenario(ScenarioConfig("nla", seed=seed))
    support = bernstein_support_from_data(bundle.train.y_lower)
    model = c_probit_model(bundle.train.p, order=6, support=support)
    fits = fit_path(model, bundle.train, xi_grid, fit_cfg)
    rows = []
    for xi, fit in zip(xi_grid, fits):
        rows += _report_rows("nla", seed, xi, model, fit.params, bundle.test)
        rows += _report_rows("nla", seed, xi, model, fit.params, bundle.test_unperturbed,
                             suffix="_plain")
        rows += _beta_rows("nla", seed, xi, fit.params)
    return rows


def replicate_iv1(seed: int, xi_grid=(0.0, 1.0, 10.0, 100.0),
                  fit_cfg: FitConfig = DEFAULT_FIT) -> list[dict]:
    bundle = make_scenario(ScenarioConfig("iv1", seed=seed))
    support = bernstein_support_from_data(bundle.train.y_lower)
    model = c_probit_model(bundle.train.p, order=6, support=support)
    fits = fit_path(model, bundle.train, xi_grid, fit_cfg)
    rows = []
    for xi, fit in zip(xi_grid, fits):
        rows += _report_rows("iv1", seed, xi, model, fit.params, bundle.test)
        rows += _beta_rows("iv1", seed, xi, fit.params)
        corr = residual_anchor_correlation(
            score_residuals(model, fit.params, bundle.train), bundle.train.A
        )
        rows.append(_row("iv1", seed, xi, "resid_anchor_corr", corr))
    return rows


def replicate_iv2(
    seed: int,
    m_x: float,
    do_levels=(0.0, 1.0, 1.8, 3.0),
    xi_grid=(0.0, 1.0, 10.0, 100.0, 1e3),
    fit_cfg: FitConfig = DEFAULT_FIT,
    k_classes: int = 10,
) -> list[dict]:
    rows = []
    first = ScenarioConfig("iv2", seed=seed, m_x=m_x, k_classes=k_classes,
                           do_level=do_levels[0])
    bundle = make_scenario(first)
    model = o_logit_model(bundle.train.p, k_classes)
    fits = fit_path(model, bundle.train, xi_grid, fit_cfg)
    for xi, fit in zip(xi_grid, fits):
        rows += _beta_rows("iv2", seed, xi, fit.params, m_x=m_x)
    for do_level in do_levels:
        cfg = ScenarioConfig("iv2", seed=seed, m_x=m_x, k_classes=k_classes, do_level=do_level)
        test = make_scenario(cfg).test
        for xi, fit in zip(xi_grid, fits):
            rows += _report_rows("iv2", seed, xi, model, fit.params, test,
                                 m_x=m_x, do_level=do_level)
    return rows


def _run_one(args) -> list[dict]:
    experiment, seed, kwargs = args
    if experiment == "la":
        return replicate_la(seed, **kwargs)
    if experiment == "nla":
        return replicate_nla(seed, **kwargs)
    if experiment == "iv1":
        return replicate_iv1(seed, **kwargs)
    raise ScenarioError(experiment)


def _run_one_iv2(args) -> list[dict]:
    seed, m_x, kwargs = args
    return replicate_iv2(seed, m_x, **kwargs)


def replicate_seeds(master_seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(n)]


def run_experiment(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    """All replicates of one experiment; returns long-format rows and an
    aggregate summary keyed by regularization level."""
    seeds = replicate_seeds(cfg.seed, cfg.n_replicates)
    if cfg.experiment == "iv2":
        tasks = [
            (s, m_x, {"do_levels": cfg.iv2_do_levels, "xi_grid": cfg.xi_grid,
                      "fit_cfg": cfg.fit, "k_classes": cfg.iv2_k_classes})
            for s in seeds
            for m_x in cfg.iv2_m_x_values
        ]
        runner, payload = _run_one_iv2, tasks
    else:
        grid = cfg.xi_grid
        tasks = [(cfg.experiment, s, {"xi_grid": grid, "fit_cfg": cfg.fit}) for s in seeds]
        runner, payload = _run_one, tasks
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(runner, payload))
    else:
        chunks = [runner(t) for t in payload]
    rows = [row for chunk in chunks for row in chunk]
    return rows, summarize(rows)


def summarize(rows: list[dict]) -> dict:
    """Mean and median of each metric over replicate seeds, grouped by
    scenario, xi, knobs, metric and quantile level."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        key = (row["scenario"], row["xi"], row["m_x"], row["do_level"], row["metric"], row["alpha"])
        groups.setdefault(key, []).append(row["value"])
    out = {}
    for key, values in sorted(groups.items(), key=lambda item: tuple(map(str, item[0]))):
        scenario, xi, m_x, do_level, metric, alpha = key
        label = f"scenario={scenario} xi={xi} m_x={m_x} do={do_level} metric={metric} alpha={alpha}"
        out[label] = {
            "mean": float(np.mean(values)),
            "median": float(np.median(values)),
            "n": len(values),
        }
    return out
