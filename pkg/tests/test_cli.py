import json
import subprocess
import sys

import numpy as np
import pytest

from oobci.cli import main
from oobci.fileio import MatrixBundle, save_bundle


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture
def csv_path(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 3))
    y = X[:, 0] + 0.5 * rng.standard_normal(60)
    path = tmp_path / "data.csv"
    rows = ["a,b,c,target"] + [",".join(repr(float(v)) for v in [*x, t]) for x, t in zip(X, y)]
    path.write_text("\n".join(rows) + "\n")
    return path


def test_fit_se_ci_pipeline(tmp_path, csv_path, capsys):
    out = tmp_path / "fit"
    assert main(["fit", "--data", str(csv_path), "--response", "target", "--B", "300",
                 "--seed", "2", "--out", str(out)]) == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["n_train"] == 60 and fit["config"]["B"] == 300
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 2 and str(csv_path) in manifest["inputs"]

    se_out = tmp_path / "se"
    assert main(["se", "--bundle", str(out / "bundle.csv"), "--out", str(se_out)]) == 0
    rep = json.loads((se_out / "se.json").read_text())
    assert rep["err_oob"] == fit["err_oob"] and rep["se_jab"] == fit["se_jab"]
    assert (se_out / "influence.csv").read_text().startswith("row,y,oob_pred,loss,influence")

    se_model = tmp_path / "se_model"
    assert main(["se", "--model", str(out / "model.npz"), "--out", str(se_model)]) == 0
    assert json.loads((se_model / "se.json").read_text())["se_delta"] == rep["se_delta"]

    ci_out = tmp_path / "ci"
    assert main(["ci", "--report", str(se_out / "se.json"), "--transform", "all",
                 "--out", str(ci_out)]) == 0
    rows = json.loads((ci_out / "intervals.json").read_text())["intervals"]
    assert len(rows) == 12


def test_fit_with_holdout(tmp_path, csv_path):
    out = tmp_path / "fit"
    assert main(["fit", "--data", str(csv_path), "--response", "target", "--B", "100",
                 "--train-fraction", "0.25", "--out", str(out)]) == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["n_train"] == 15 and fit["n_test"] == 45 and "test_error" in fit


def test_outputs_reproducible(tmp_path, csv_path):
    for d in ("a", "b"):
        assert main(["fit", "--data", str(csv_path), "--response", "target", "--B", "50",
                     "--seed", "9", "--out", str(tmp_path / d)]) == 0
    for name in ("bundle.csv", "bundle.json", "fit.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_ci_delta_plus_example(tmp_path, capsys):
    code = main(["ci", "--err", "10", "--se-naive", "0.9", "--se-delta", "1.0",
                 "--method", "delta_plus", "--alpha", "0.10", "--out", str(tmp_path)])
    assert code == 0
    row = json.loads((tmp_path / "intervals.json").read_text())["intervals"][0]
    assert row["se"] == 1.0
    assert row["lo"] == pytest.approx(8.355, abs=1e-3)
    assert row["hi"] == pytest.approx(11.645, abs=1e-3)


def test_ci_missing_se_is_usage_error(tmp_path, capsys):
    assert main(["ci", "--err", "1", "--method", "jab", "--out", str(tmp_path)]) == 2
    assert _error(capsys)["error"] == "usage"


def test_ci_transform_error(tmp_path, capsys):
    code = main(["ci", "--err", "0", "--se-naive", "0.1", "--method", "naive",
                 "--transform", "log", "--out", str(tmp_path)])
    assert code == 3
    assert _error(capsys)["error"] == "transform"


def test_se_insufficient_trees(tmp_path, capsys):
    # row 0 is in bag for both trees
    P = np.zeros((3, 2))
    N = np.array([[2, 1], [1, 0], [0, 2]])
    save_bundle(MatrixBundle(P, N, np.zeros(3)), tmp_path / "bad.csv")
    code = main(["se", "--bundle", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o")])
    assert code == 4
    err = _error(capsys)
    assert err["error"] == "insufficient_trees" and "B/.632" in err["message"]


def test_model_and_bundle_conflict(tmp_path, capsys):
    code = main(["se", "--model", "m.npz", "--bundle", "b.csv", "--out", str(tmp_path)])
    assert code == 2
    assert _error(capsys)["error"] == "usage"


def test_unknown_flag_is_usage_error(capsys):
    assert main(["se", "--frobnicate"]) == 2


def test_classification_rejects_regression_loss(tmp_path, capsys):
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    N = np.array([[0, 2], [2, 0]])
    save_bundle(MatrixBundle(P, N, np.array([1.0, 1.0]), "classification"), tmp_path / "b.csv")
    code = main(["se", "--bundle", str(tmp_path / "b.csv"), "--loss", "abs", "--out", str(tmp_path)])
    assert code == 2


def test_se_absolute_loss(tmp_path, csv_path):
    out = tmp_path / "fit"
    main(["fit", "--data", str(csv_path), "--response", "target", "--B", "200", "--out", str(out)])
    assert main(["se", "--bundle", str(out / "bundle.csv"), "--loss", "abs",
                 "--variant", "exact-minus-one", "--out", str(tmp_path / "se")]) == 0
    rep = json.loads((tmp_path / "se" / "se.json").read_text())
    assert rep["loss"] == "abs" and rep["variant"] == "exact-minus-one"


def test_missing_input_file(tmp_path, capsys):
    code = main(["fit", "--data", str(tmp_path / "nope.csv"), "--response", "y",
                 "--out", str(tmp_path)])
    assert code == 3
    assert _error(capsys)["error"] == "input"


def test_simulate_and_coverage(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--n", "25", "--p", "2,3", "--B", "150", "--R", "2",
                 "--n-test", "300", "--transforms", "identity,sqrt", "--out", str(sim)]) == 0
    summary = json.loads((sim / "summary.json").read_text())
    assert len(summary["settings"]) == 2
    assert len(summary["report"]) == 2 * 4 * 2
    cov = tmp_path / "cov"
    assert main(["coverage", "--records", str(sim / "records.csv"), "--out", str(cov)]) == 0
    report = json.loads((cov / "report.json").read_text())["report"]
    assert report == summary["report"]


def test_coverage_on_empty_records(tmp_path, capsys):
    path = tmp_path / "r.csv"
    path.write_text("")
    assert main(["coverage", "--records", str(path), "--out", str(tmp_path / "o")]) != 0
    assert _error(capsys)["error"] == "input"


def test_sd_curve_command(tmp_path):
    out = tmp_path / "curve"
    assert main(["sd-curve", "--n", "25", "--p", "3", "--B-grid", "100,200", "--R", "2",
                 "--out", str(out)]) == 0
    lines = (out / "sd_curve.csv").read_text().splitlines()
    assert lines[0].startswith("B,method,mean_se") and len(lines) == 9


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "oobci.cli", "ci", "--err", "1", "--se-naive",
                           "0.1", "--method", "naive", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["intervals"][0]["method"] == "naive"
