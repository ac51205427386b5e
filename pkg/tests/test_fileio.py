import json

import numpy as np
import pytest

from oobci import Dataset, InputError, se_report
from oobci.fileio import (
    MatrixBundle,
    RunManifest,
    load_bundle,
    load_csv,
    read_records,
    save_bundle,
    split_train_test,
    write_records,
)
from oobci.sim import SimConfig, coverage_report, run_replicate


def test_load_small_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y\n1,2\n3,4\n5,6\n")
    data = load_csv(path, "y")
    assert data.n == 3 and data.p == 1
    assert data.y.tolist() == [2.0, 4.0, 6.0]
    assert data.X[:, 0].tolist() == [1.0, 3.0, 5.0]


def test_missing_response_names_columns(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(InputError, match="available columns: a, b"):
        load_csv(path, "y")


def test_classification_labels_checked(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y\n1,0\n2,1\n3,2\n")
    with pytest.raises(InputError, match=":4:"):
        load_csv(path, "y", "classification")


@pytest.mark.parametrize("body,where", [
    ("x,y\n1,2\n3\n", ":3:"),
    ("x,y\n1,2\nfoo,4\n", ":3:"),
    ("x,y\n1,\n", ":2:"),
    ("", "empty"),
    ("x,y\n", "no data"),
])
def test_malformed_csv(tmp_path, body, where):
    path = tmp_path / "d.csv"
    path.write_text(body)
    with pytest.raises(InputError, match=where):
        load_csv(path, "y")


def test_split_sizes_and_determinism():
    rng = np.random.default_rng(0)
    data = Dataset(rng.standard_normal((1994, 2)), rng.standard_normal(1994))
    tr, te = split_train_test(data, 0.25, seed=3)
    assert (tr.n, te.n) == (499, 1495)
    tr2, _ = split_train_test(data, 0.25, seed=3)
    assert np.array_equal(tr.X, tr2.X)
    rows = np.concatenate([tr.y, te.y])
    assert sorted(rows) == sorted(data.y)


def test_split_degenerate():
    data = Dataset(np.zeros((5, 1)), np.arange(5.0))
    with pytest.raises(InputError):
        split_train_test(data, 0.1)
    with pytest.raises(InputError):
        split_train_test(data, 1.0)


def test_bundle_round_trip_is_bit_exact(tmp_path, reg_forest):
    model, P = reg_forest
    y = model.data.y
    path = tmp_path / "b.csv"
    save_bundle(MatrixBundle(P, model.inbag, y), path)
    back = load_bundle(path)
    assert np.array_equal(back.P, P) and np.array_equal(back.N, model.inbag)
    assert np.array_equal(back.y, y)
    a = se_report(P, model.inbag, y)
    b = se_report(back.P, back.N, back.y)
    for m in ("naive", "delta", "delta_plus", "jab"):
        assert a.se(m) == b.se(m)
    assert a.err_oob == b.err_oob
    assert np.array_equal(a.influence.D, b.influence.D)


def test_bundle_task_and_digest(tmp_path, cls_forest):
    model, P = cls_forest
    path = tmp_path / "b.csv"
    save_bundle(MatrixBundle(P, model.inbag, model.data.y, "classification"), path)
    assert load_bundle(path).task.value == "classification"
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["n"] == model.data.n and meta["B"] == model.B
    path.write_text(path.read_text().replace("\n", "\n", 1) + "")
    with open(path, "a") as fh:
        fh.write("\n")
    with pytest.raises(InputError, match="digest"):
        load_bundle(path)


def test_bundle_without_sidecar(tmp_path):
    path = tmp_path / "ext.csv"
    path.write_text("y,pred_0,pred_1,inbag_0,inbag_1\n1.0,0.5,1.5,0,2\n2.0,2.5,1.0,2,0\n")
    b = load_bundle(path)
    assert b.B == 2 and b.N.tolist() == [[0, 2], [2, 0]]


def test_bundle_validation():
    with pytest.raises(InputError, match="sums to"):
        MatrixBundle(np.zeros((2, 1)), np.array([[1], [0]]), np.zeros(2))
    with pytest.raises(InputError):
        MatrixBundle(np.zeros((2, 1)), np.array([[1.5], [0.5]]), np.zeros(2))


def test_records_round_trip(tmp_path):
    cfg = SimConfig(n=25, p=2, B=150, R=2, n_test=200, transforms=("identity", "log", "sqrt"))
    recs = [run_replicate(cfg, r) for r in range(2)]
    path = tmp_path / "r.csv"
    write_records(recs, path)
    back = read_records(path)
    assert len(back) == 2
    for a, b in zip(recs, back):
        assert a.err_oob == b.err_oob and a.truth == b.truth
        assert a.se == b.se and a.intervals == b.intervals and a.setting == b.setting
    cells_a = coverage_report(recs)
    cells_b = coverage_report(back)
    assert cells_a == cells_b


def test_empty_records_file(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("")
    assert read_records(path) == []


def test_manifest_contents(tmp_path):
    src = tmp_path / "in.txt"
    src.write_text("hello")
    m = RunManifest("fit", ["--B", "10"], {"B": 10}, 3)
    m.add_input(src)
    m.write(tmp_path / "manifest.json")
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["seed"] == 3 and doc["config"] == {"B": 10}
    assert doc["inputs"][str(src)] == (
        "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824")
    assert {"oobci", "numpy", "python", "backend"} <= set(doc["versions"])
