import math

import numpy as np
import pytest

from oobci import InputError, build_interval
from oobci.sim import (
    CoverageRecord,
    SimConfig,
    coverage_report,
    find_cell,
    generate_dataset,
    run_replicate,
    sd_curve,
)

SETTING = {"n": 10, "p": 2, "snr": 1.0, "task": "regression", "B": 50, "alpha": 0.1}


def _record(truth, lo, hi, rep=0, setting=SETTING):
    return CoverageRecord(rep, 0.5, truth, {"naive": 0.1, "delta": 0.1, "delta_plus": 0.1, "jab": 0.1},
                          {("naive", "identity"): (lo, hi)}, dict(setting))


def test_flags_and_counting():
    recs = [_record(2.0, 0.0, 1.0), _record(-1.0, 0.0, 1.0), _record(0.5, 0.0, 1.0, 2),
            _record(0.7, 0.0, 1.0, 3)]
    assert [r.flag("naive", "identity") for r in recs] == ["low", "high", "none", "none"]
    cell = find_cell(coverage_report(recs), "naive")
    assert cell.miscoverage == 0.5
    assert cell.miscover_high == 0.25 and cell.miscover_low == 0.25
    assert cell.mean_width == 1.0 and cell.replicates == 4


def test_all_covered():
    recs = [_record(0.5, 0.0, 1.0, r) for r in range(5)]
    assert find_cell(coverage_report(recs), "naive").miscoverage == 0.0


def test_undefined_intervals_are_excluded():
    recs = [_record(0.5, 0.0, 1.0), _record(0.5, math.nan, math.nan, 1)]
    cell = find_cell(coverage_report(recs), "naive")
    assert cell.undefined == 1 and cell.replicates == 1 and cell.miscoverage == 0.0


def test_report_groups_by_setting():
    other = dict(SETTING, p=3)
    recs = [_record(2.0, 0.0, 1.0), _record(0.5, 0.0, 1.0, setting=other)]
    cells = coverage_report(recs)
    assert len(cells) == 2
    assert find_cell(cells, "naive", p=2).miscoverage == 1.0
    assert find_cell(cells, "naive", p=3).miscoverage == 0.0


def test_empty_report():
    with pytest.raises(InputError):
        coverage_report([])


def test_dataset_shapes_and_determinism():
    a, at = generate_dataset(30, 7, 2.0, seed=4, n_test=50)
    b, _ = generate_dataset(30, 7, 2.0, seed=4, n_test=50)
    assert a.X.shape == (30, 7) and at.X.shape == (50, 7)
    assert np.array_equal(a.y, b.y)


def test_signal_to_noise_ratio():
    _, test = generate_dataset(2, 10, 3.0, seed=0, n_test=200_000)
    beta_part = test.X[:, :5].sum(axis=1) * math.sqrt(3.0 / 5)
    noise = test.y - beta_part
    assert np.var(beta_part) / np.var(noise) == pytest.approx(3.0, rel=0.02)
    assert np.allclose(test.X[:, 5:].std(axis=0), 1.0, atol=0.01)


@pytest.mark.parametrize("snr", [0.0, 2.0])
def test_classification_base_rate(snr):
    _, test = generate_dataset(2, 10, snr, "classification", base_rate=0.25, seed=1, n_test=200_000)
    assert test.y.mean() == pytest.approx(0.25, abs=0.005)


def test_snr_zero_regression_has_unit_error_floor():
    _, test = generate_dataset(2, 5, 0.0, seed=2, n_test=200_000)
    assert np.var(test.y) == pytest.approx(1.0, rel=0.01)


def test_config_validation():
    with pytest.raises(InputError):
        SimConfig(snr=-1)
    with pytest.raises(InputError):
        SimConfig(R=0)
    with pytest.raises(InputError):
        SimConfig(alpha=1.0)


def _small_cfg(**kw):
    base = dict(n=30, p=3, snr=2.0, B=200, R=3, n_test=500, seed=5,
                transforms=("identity", "log", "sqrt"))
    base.update(kw)
    return SimConfig(**base)


def test_replicate_is_deterministic_and_nested():
    cfg = _small_cfg()
    a = run_replicate(cfg, 1)
    b = run_replicate(cfg, 1)
    assert a.err_oob == b.err_oob and a.truth == b.truth and a.intervals == b.intervals
    assert a.se["delta_plus"] == max(a.se["naive"], a.se["delta"])
    lo_n, hi_n = a.intervals[("naive", "identity")]
    lo_p, hi_p = a.intervals[("delta_plus", "identity")]
    assert lo_p <= lo_n and hi_n <= hi_p
    lo, hi = a.intervals[("jab", "identity")]
    ci = build_interval(a.err_oob, a.se["jab"], cfg.alpha)
    assert (lo, hi) == (ci.lo, ci.hi)


def test_replicates_differ():
    cfg = _small_cfg()
    assert run_replicate(cfg, 0).err_oob != run_replicate(cfg, 1).err_oob


def test_constant_response_replicate():
    cfg = _small_cfg(snr=0.0, noise_sd=0.0)
    rec = run_replicate(cfg, 0)
    assert rec.truth == 0.0 and rec.err_oob == 0.0
    for key, (lo, hi) in rec.intervals.items():
        if key[1] == "identity":
            assert lo == hi == 0.0
        assert rec.flag(*key) in ("none", "undefined")


def test_high_low_exclusive():
    cfg = _small_cfg(R=4)
    for r in range(4):
        rec = run_replicate(cfg, r)
        for key, (lo, hi) in rec.intervals.items():
            assert not (lo > rec.truth and hi < rec.truth)


def test_sd_curve_shape():
    cfg = _small_cfg(R=3)
    pts = sd_curve(cfg, [100, 200])
    assert {(p.B, p.method) for p in pts} == {(b, m) for b in (100, 200)
                                              for m in ("naive", "delta", "delta_plus", "jab")}
    assert all(p.ratio >= 0 and p.mean_se >= 0 for p in pts)


def test_sd_curve_validation():
    with pytest.raises(InputError):
        sd_curve(_small_cfg(R=1), [100])
    with pytest.raises(InputError):
        sd_curve(_small_cfg(), [200, 100])


def test_lower_alpha_never_adds_miscoverage():
    recs = [run_replicate(_small_cfg(), r) for r in range(3)]
    for m in ("naive", "delta", "jab"):
        counts = []
        for alpha in (0.2, 0.1, 0.05, 0.01):
            miss = 0
            for rec in recs:
                ci = build_interval(rec.err_oob, rec.se[m], alpha)
                miss += not ci.contains(rec.truth)
            counts.append(miss)
        assert counts == sorted(counts, reverse=True)
