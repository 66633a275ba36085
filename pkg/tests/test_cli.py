import json
from pathlib import Path

import numpy as np
import pytest

import anchortram as at
from anchortram.cli import main

FAST_FIT = ["--epochs", "6000"]


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def iv1_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("iv1")
    assert run(["simulate", "--scenario", "iv1", "--seed", 1, "--out-dir", out,
                "--n-train", 400, "--n-test", 300]) == 0
    spec = out / "spec.json"
    spec.write_text('{"dist": "normal", "basis": {"kind": "bernstein", "order": 6}}\n')
    return out


def test_simulate_outputs(tmp_path):
    out = tmp_path / "sim"
    assert run(["simulate", "--scenario", "iv1", "--seed", 1, "--out-dir", out]) == 0
    train = at.Dataset.from_csv(out / "train.csv")
    test = at.Dataset.from_csv(out / "test.csv")
    assert train.n == 1000 and test.n == 2000
    meta = json.loads((out / "meta.json").read_text())
    assert meta["scenario"] == "iv1" and meta["seed"] == 1
    assert meta["beta_true"] == [0.3]


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(["simulate", "--scenario", "la", "--seed", 3, "--out-dir", a,
         "--n-train", 50, "--n-test", 50])
    run(["simulate", "--scenario", "la", "--seed", 3, "--out-dir", b,
         "--n-train", 50, "--n-test", 50])
    assert (a / "train.csv").read_bytes() == (b / "train.csv").read_bytes()
    assert (a / "test.csv").read_bytes() == (b / "test.csv").read_bytes()


def test_simulate_unknown_scenario_exit_code(tmp_path, capsys):
    code = run(["simulate", "--scenario", "nope", "--out-dir", tmp_path])
    assert code == 4
    err = capsys.readouterr().err
    assert err.startswith("anchortram-error: ScenarioError:")
    assert err.count("\n") == 1


def test_simulate_bad_knob_exit_code(tmp_path):
    assert run(["simulate", "--scenario", "iv2", "--m-x", 0.123, "--out-dir", tmp_path]) == 4
    assert run(["simulate", "--scenario", "iv2", "--m-x", 0.123, "--custom",
                "--out-dir", tmp_path, "--n-train", 50, "--n-test", 50]) == 0


def test_fit_deterministic_and_roundtrip(iv1_dir, tmp_path):
    m1 = tmp_path / "m1.json"
    m2 = tmp_path / "m2.json"
    args = ["fit", "--data", iv1_dir / "train.csv", "--model-spec", iv1_dir / "spec.json",
            "--xi", 0.5, *FAST_FIT]
    assert run(args + ["--out", m1]) == 0
    assert run(args + ["--out", m2]) == 0
    assert m1.read_bytes() == m2.read_bytes()
    # round trip: stored training nll is reproduced exactly by the loaded model
    model, params, extra = at.load_model(m1)
    data = at.Dataset.from_csv(iv1_dir / "train.csv")
    again = -at.loglik(model, params, data) / data.n
    assert abs(again - extra["train_nll"]) <= 1e-12
    assert extra["xi"] == 0.5
    # resolved support was embedded in the spec
    assert "support" in json.loads(m1.read_text())["spec"]["basis"]


def test_fit_gamma_flag_translates(iv1_dir, tmp_path):
    out = tmp_path / "g.json"
    assert run(["fit", "--data", iv1_dir / "train.csv", "--model-spec", iv1_dir / "spec.json",
                "--gamma", 5.0, "--out", out, *FAST_FIT]) == 0
    assert json.loads(out.read_text())["xi"] == 2.0


def test_fit_malformed_csv_exit_code(iv1_dir, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("y_lower,y_upper,kind,x1,a1\n1.0,1.0,exact,0.2\n")
    assert run(["fit", "--data", bad, "--model-spec", iv1_dir / "spec.json",
                "--out", tmp_path / "m.json"]) == 2


def test_fit_bad_model_spec_exit_code(iv1_dir, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"dist": "cauchy", "basis": {"kind": "linear"}}\n')
    assert run(["fit", "--data", iv1_dir / "train.csv", "--model-spec", spec,
                "--out", tmp_path / "m.json"]) == 3


def test_residuals_command(iv1_dir, tmp_path):
    model_path = tmp_path / "m.json"
    run(["fit", "--data", iv1_dir / "train.csv", "--model-spec", iv1_dir / "spec.json",
         "--xi", 0, "--out", model_path, *FAST_FIT])
    out = tmp_path / "resid.csv"
    assert run(["residuals", "--model", model_path, "--data", iv1_dir / "train.csv",
                "--out", out]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "resid"
    data = at.Dataset.from_csv(iv1_dir / "train.csv")
    assert len(lines) == data.n + 1
    model, params, _ = at.load_model(model_path)
    expected = at.score_residuals(model, params, data)
    got = np.array([float(v) for v in lines[1:]])
    assert np.max(np.abs(got - expected)) <= 1e-12


def test_path_command(iv1_dir, tmp_path):
    out = tmp_path / "path.csv"
    assert run(["path", "--data", iv1_dir / "train.csv", "--model-spec", iv1_dir / "spec.json",
                "--xi-grid", "0,1,10", "--out", out, *FAST_FIT]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 4
    header = lines[0].split(",")
    assert header[:3] == ["xi", "nll_term", "penalty_term"]
    assert "beta_1" in header


def test_path_unsorted_grid_exit_code(iv1_dir, tmp_path):
    assert run(["path", "--data", iv1_dir / "train.csv", "--model-spec", iv1_dir / "spec.json",
                "--xi-grid", "10,1", "--out", tmp_path / "p.csv"]) == 3


def test_loeo_command(tmp_path):
    rng = np.random.default_rng(0)
    n_per = 40
    envs = np.repeat([1.0, 2.0, 3.0], n_per)
    X = rng.standard_normal((3 * n_per, 1))
    y = X[:, 0] + 0.5 * rng.standard_normal(3 * n_per)
    y[envs == 3.0] += 2.0
    data = at.exact_dataset(y, X, envs[:, None])
    csv_path = tmp_path / "envs.csv"
    data.to_csv(csv_path)
    spec = tmp_path / "spec.json"
    spec.write_text('{"dist": "normal", "basis": {"kind": "linear"}}\n')
    out = tmp_path / "loeo.csv"
    assert run(["loeo", "--data", csv_path, "--model-spec", spec, "--env-col", "a1",
                "--xi-grid", "0,1", "--out", out, *FAST_FIT]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 1 + 3 * 2  # three environments, two grid points
    assert run(["loeo", "--data", csv_path, "--model-spec", spec, "--env-col", "b7",
                "--xi-grid", "0", "--out", out]) == 2


def test_repro_iv2_row_count(tmp_path):
    out = tmp_path / "repro"
    assert run(["repro", "--experiment", "iv2", "--replicates", 1, "--seed", 0,
                "--xi-grid", "0,10", "--out-dir", out, "--epochs", 4000]) == 0
    lines = (out / "results.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header == ["scenario", "seed", "xi", "m_x", "do_level", "metric", "alpha", "value"]
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    # per replicate and m_x: one beta row per grid point plus, for each of
    # the four do levels and each grid point, a mean plus six quantile rows
    n_grid, n_mx, n_do, n_q = 2, 3, 4, 6
    expected = 1 * n_mx * (n_grid + n_do * n_grid * (1 + n_q))
    assert len(rows) == expected
    combos = {(r["m_x"], r["do_level"], r["xi"]) for r in rows if r["metric"] == "mean_nll"}
    assert len(combos) == n_mx * n_do * n_grid
    assert (out / "summary.json").exists()


def test_version_and_help():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
