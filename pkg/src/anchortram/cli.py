"""Command-line interface.

Subcommands: simulate (write scenario train/test CSVs plus metadata), fit
(estimate one model at a fixed regularization level), residuals (score
residuals of a fitted model), path (warm-started regularization path), loeo
(leave-one-environment-out cross validation) and repro (multi-replicate
experiment bundles).

Every failure prints a single machine-parsable line
``anchortram-error: <kind>: <message>`` on stderr and exits with a code
that identifies the error class:

    2 data format, 3 model specification, 4 scenario,
    5 degenerate projection, 6 infeasible likelihood,
    7 unsupported metric, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    AnchorTramError,
    DataFormatError,
    DegenerateProjectionError,
    InfeasibleLikelihoodError,
    ModelSpecError,
    ScenarioError,
    UnsupportedMetricError,
)
from .evaluation import loeo_cv
from .experiments import DEFAULT_XI_GRID, ExperimentConfig, run_experiment
from .optim import FitConfig, fit_anchor, fit_path
from .sem import ScenarioConfig, make_scenario
from .tram import (
    Dataset,
    ModelSpec,
    bernstein_support_from_data,
    load_model,
    loglik,
    save_model,
    score_residuals,
)

EXIT_CODES = {
    DataFormatError: 2,
    ModelSpecError: 3,
    ScenarioError: 4,
    DegenerateProjectionError: 5,
    InfeasibleLikelihoodError: 6,
    UnsupportedMetricError: 7,
}


def _parse_xi_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ModelSpecError(f"cannot parse xi grid {text!r}") from None
    if not grid == sorted(grid):
        raise ModelSpecError("xi grid must be sorted ascending")
    return grid


def _fit_config(args) -> FitConfig:
    return FitConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.fit_seed,
        full_batch=None if args.full_batch == "auto" else args.full_batch == "yes",
        tol_grad=args.tol_grad,
    )


def _add_fit_flags(parser, default_epochs=30_000):
    parser.add_argument("--epochs", type=int, default=default_epochs,
                        help="cap on optimizer epochs (full-batch fits stop early on tolerance)")
    parser.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    parser.add_argument("--batch-size", type=int, default=250)
    parser.add_argument("--full-batch", choices=["auto", "yes", "no"], default="auto",
                        help="deterministic full-batch gradients (auto: yes for n <= 2000)")
    parser.add_argument("--fit-seed", type=int, default=0,
                        help="optimizer seed (mini-batch shuffle)")
    parser.add_argument("--tol-grad", type=float, default=1e-6)


def _load_model_spec(path: str, data: Dataset) -> ModelSpec:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelSpecError(f"cannot read model spec {path}: {exc}") from None
    raw.setdefault("n_covariates", data.p)
    basis = raw.get("basis", {})
    if basis.get("kind") == "bernstein" and "support" not in basis:
        basis["support"] = list(bernstein_support_from_data(
            np.concatenate([data.y_lower[np.isfinite(data.y_lower)],
                            data.y_upper[np.isfinite(data.y_upper)]])
        ))
    spec = ModelSpec.from_dict(raw)
    if spec.n_covariates != data.p:
        raise ModelSpecError(
            f"model spec expects {spec.n_covariates} covariates, data has {data.p}"
        )
    return spec


def cmd_simulate(args) -> int:
    cfg = ScenarioConfig(
        scenario=args.scenario,
        seed=args.seed,
        n_train=args.n_train,
        n_test=args.n_test,
        m_x=args.m_x,
        k_classes=args.k_classes,
        do_level=args.do_level,
        custom=args.custom,
    )
    bundle = make_scenario(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle.train.to_csv(out / "train.csv")
    bundle.test.to_csv(out / "test.csv")
    with open(out / "meta.json", "w") as fh:
        json.dump(bundle.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'train.csv'} ({bundle.train.n} rows), "
          f"{out / 'test.csv'} ({bundle.test.n} rows), {out / 'meta.json'}")
    return 0


def cmd_fit(args) -> int:
    data = Dataset.from_csv(args.data)
    model = _load_model_spec(args.model_spec, data)
    xi = args.xi
    if args.gamma is not None:
        # squared-error regularization level, translated to its
        # distributional equivalent
        if args.gamma < 0:
            raise ModelSpecError("gamma must be non-negative")
        xi = (args.gamma - 1.0) / 2.0
        if xi < 0.0:
            xi = 0.0
    fit = fit_anchor(model, data, xi, _fit_config(args))
    train_nll = -loglik(model, fit.params, data) / data.n
    save_model(
        args.out,
        model,
        fit.params,
        extra={
            "xi": xi,
            "converged": bool(fit.converged),
            "grad_norm": fit.grad_norm,
            "train_nll": train_nll,
        },
    )
    print(f"wrote {args.out} (converged={fit.converged}, grad_norm={fit.grad_norm:.3e}, "
          f"train nll={train_nll:.6f})")
    return 0


def cmd_residuals(args) -> int:
    data = Dataset.from_csv(args.data)
    model, params, _ = load_model(args.model)
    resid = score_residuals(model, params, data)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["resid"])
        for v in resid:
            writer.writerow([repr(float(v))])
    print(f"wrote {args.out} ({len(resid)} rows)")
    return 0


def cmd_path(args) -> int:
    data = Dataset.from_csv(args.data)
    model = _load_model_spec(args.model_spec, data)
    grid = _parse_xi_grid(args.xi_grid)
    fits = fit_path(model, data, grid, _fit_config(args))
    header = (
        ["xi", "nll_term", "penalty_term", "total", "grad_norm", "converged"]
        + [f"theta_{j + 1}" for j in range(model.theta_dim)]
        + [f"beta_{j + 1}" for j in range(model.n_covariates)]
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for xi, fit in zip(grid, fits):
            last = fit.trace[-1]
            row = [repr(float(xi)), repr(last.nll_term), repr(last.penalty_term),
                   repr(last.total), repr(fit.grad_norm), str(bool(fit.converged)).lower()]
            row += [repr(float(v)) for v in fit.params.theta]
            row += [repr(float(v)) for v in fit.params.beta]
            writer.writerow(row)
    print(f"wrote {args.out} ({len(grid)} fits)")
    return 0


def cmd_loeo(args) -> int:
    data = Dataset.from_csv(args.data)
    model = _load_model_spec(args.model_spec, data)
    grid = _parse_xi_grid(args.xi_grid)
    col = args.env_col
    if not col.startswith("a"):
        raise DataFormatError("--env-col must name an anchor column, e.g. a1")
    try:
        idx = int(col[1:]) - 1
        env = data.A[:, idx]
    except (ValueError, IndexError):
        raise DataFormatError(f"no anchor column named {col!r}") from None
    result = loeo_cv(model, data, env, grid, _fit_config(args))
    header = ["env", "xi", "mean_nll", "n_held_out"] + [
        f"beta_{j + 1}" for j in range(model.n_covariates)
    ]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for fold in result.folds:
            for i, xi in enumerate(fold.xi_grid):
                row = [repr(float(fold.env)), repr(float(xi)), repr(fold.mean_nll[i]),
                       str(fold.n_held_out)]
                row += [repr(float(v)) for v in fold.coefficients[i]]
                writer.writerow(row)
    print(f"wrote {args.out} ({len(result.folds)} environments x {len(grid)} grid points)")
    return 0


def cmd_repro(args) -> int:
    cfg = ExperimentConfig(
        experiment=args.experiment,
        replicates=args.replicates,
        seed=args.seed,
        xi_grid=tuple(_parse_xi_grid(args.xi_grid)),
        workers=args.workers,
        fit=_fit_config(args),
    )
    rows, summary = run_experiment(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = out / "results.csv"
    with open(results, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "seed", "xi", "m_x", "do_level", "metric", "alpha", "value"])
        for row in rows:
            writer.writerow([
                row["scenario"], row["seed"], repr(float(row["xi"])),
                "" if row["m_x"] == "" else repr(float(row["m_x"])),
                "" if row["do_level"] == "" else repr(float(row["do_level"])),
                row["metric"],
                "" if row["alpha"] == "" else repr(float(row["alpha"])),
                repr(row["value"]),
            ])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {results} ({len(rows)} rows) and {out / 'summary.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchortram",
        description="distributional anchor regression with transformation models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a named scenario to CSV files")
    p.add_argument("--scenario", required=True, help="la, nla, iv1 or iv2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--m-x", type=float, default=-1.0, help="iv2 instrument strength")
    p.add_argument("--k-classes", type=int, default=10, help="iv2 class count")
    p.add_argument("--do-level", type=float, default=1.8, help="iv2 test intervention level")
    p.add_argument("--custom", action="store_true",
                   help="allow scenario knobs outside their standard values")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one model at a fixed xi")
    p.add_argument("--data", required=True)
    p.add_argument("--model-spec", required=True, help="JSON file with dist and basis")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=None,
                   help="squared-error regularization level; overrides --xi via xi=(gamma-1)/2")
    p.add_argument("--out", required=True)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("residuals", help="score residuals of a fitted model")
    p.add_argument("--model", required=True, help="fitted model JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("path", help="warm-started fits over a xi grid")
    p.add_argument("--data", required=True)
    p.add_argument("--model-spec", required=True)
    p.add_argument("--xi-grid", default=",".join(repr(x) for x in DEFAULT_XI_GRID))
    p.add_argument("--out", required=True)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("loeo", help="leave-one-environment-out cross validation")
    p.add_argument("--data", required=True)
    p.add_argument("--model-spec", required=True)
    p.add_argument("--env-col", required=True, help="anchor column holding environment labels")
    p.add_argument("--xi-grid", default=",".join(repr(x) for x in DEFAULT_XI_GRID))
    p.add_argument("--out", required=True)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_loeo)

    p = sub.add_parser("repro", help="multi-replicate experiment bundle for one scenario")
    p.add_argument("--experiment", required=True, help="la, nla, iv1 or iv2")
    p.add_argument("--replicates", type=int, default=None,
                   help="default: 100 (la, nla, iv1) or 200 (iv2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--xi-grid", default=",".join(repr(x) for x in DEFAULT_XI_GRID))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AnchorTramError as exc:
        code = EXIT_CODES.get(type(exc), 1)
        kind = type(exc).__name__
        print(f"anchortram-error: {kind}: {exc}", file=sys.stderr)
        return code
    except (OSError, ValueError) as exc:
        print(f"anchortram-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
