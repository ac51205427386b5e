"""Monte-Carlo coverage experiments for OOB-error confidence intervals.

A replicate draws a fresh training set, grows a forest, computes the OOB
error with every SE estimate and interval, and measures the forest's
true error on a large independent test set. ``coverage_report``
aggregates replicates into miscoverage rates split by side: an interval
misses "high" when it lies entirely above the truth and "low" when it lies
entirely below.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InputError, InsufficientTreesError, TransformError
from .forest import Dataset, ForestConfig, Task, predict, train_forest, tree_prediction_matrix
from .intervals import Method, Transform, build_interval, normal_quantile
from .oob import default_loss
from .se import se_report

log = logging.getLogger(__name__)

METHODS = (Method.NAIVE, Method.DELTA, Method.DELTA_PLUS, Method.JAB)
FLAGS = ("none", "high", "low", "undefined")


@dataclass(frozen=True)
class SimConfig:
    n: int = 110
    p: int = 10
    snr: float = 2.0
    task: Task = Task.REGRESSION
    B: int = 3000
    R: int = 1000
    n_test: int = 11_000
    alpha: float = 0.10
    transforms: tuple = (Transform.IDENTITY,)
    seed: int = 0
    base_rate: float = 0.25
    noise_sd: float = 1.0
    mtry: Optional[int] = None
    min_node_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task.parse(self.task))
        object.__setattr__(self, "transforms", tuple(Transform.parse(t) for t in self.transforms))
        if self.n < 2 or self.p < 1 or self.B < 1 or self.R < 1 or self.n_test < 1:
            raise InputError("n >= 2, p >= 1, B >= 1, R >= 1 and n_test >= 1 are required")
        if self.snr < 0:
            raise InputError("snr must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if not 0.0 < self.base_rate < 1.0:
            raise InputError("base_rate must lie in (0, 1)")

    def setting(self) -> dict:
        return {"n": self.n, "p": self.p, "snr": self.snr, "task": self.task.value,
                "B": self.B, "alpha": self.alpha}

    def forest_config(self, seed: int, B: Optional[int] = None) -> ForestConfig:
        return ForestConfig(B=B or self.B, mtry=self.mtry, min_node_size=self.min_node_size,
                            seed=seed)


def generate_dataset(n, p, snr, task="regression", base_rate=0.25, seed=0,
                     n_test=11_000, noise_sd=1.0):
    """Simulated train/test pair.

    Features are iid standard normal. The signal is ``X @ beta`` with
    ``min(5, p)`` equal nonzero coefficients scaled so that
    Var(signal) / Var(noise) = snr, and the noise is normal with SD
    ``noise_sd``. Classification labels are ``1{signal + noise > t}`` with
    ``t`` set so that P(y = 1) = base_rate.
    """
    task = Task.parse(task)
    if snr < 0:
        raise InputError("snr must be nonnegative")
    if n < 2 or p < 1:
        raise InputError("need n >= 2 and p >= 1")
    rng = np.random.default_rng(seed)
    s = min(5, p)
    beta = np.zeros(p)
    beta[:s] = noise_sd * math.sqrt(snr / s)

    def draw(m):
        X = rng.standard_normal((m, p))
        latent = X @ beta + noise_sd * rng.standard_normal(m)
        if task is Task.CLASSIFICATION:
            t = noise_sd * math.sqrt(snr + 1.0) * normal_quantile(1.0 - base_rate)
            return Dataset(X, (latent > t).astype(np.float64), task)
        return Dataset(X, latent, task)

    train = draw(n)
    test = draw(n_test)
    return train, test


def _replicate_seeds(master: int, replicate: int) -> tuple[int, int]:
    data_seed, forest_seed = np.random.SeedSequence([master, replicate]).generate_state(2, np.uint64)
    return int(data_seed), int(forest_seed)


@dataclass(frozen=True, eq=False)
class CoverageRecord:
    replicate: int
    err_oob: float
    truth: float
    se: dict  # method value -> SE
    intervals: dict  # (method value, transform value) -> (lo, hi)
    setting: dict = field(default_factory=dict)

    def flag(self, method, transform) -> str:
        key = (Method.parse(method).value, Transform.parse(transform).value)
        lo, hi = self.intervals[key]
        if math.isnan(lo) or math.isnan(hi):
            return "undefined"
        if lo > self.truth:
            return "high"
        if hi < self.truth:
            return "low"
        return "none"

    def miscover_high(self, method, transform) -> bool:
        return self.flag(method, transform) == "high"

    def miscover_low(self, method, transform) -> bool:
        return self.flag(method, transform) == "low"

    @property
    def keys(self):
        return list(self.intervals)


def _intervals(err, se: dict, alpha, transforms):
    out = {}
    for m in METHODS:
        for t in transforms:
            try:
                ci = build_interval(err, se[m.value], alpha, t, m)
                out[(m.value, t.value)] = (ci.lo, ci.hi)
            except TransformError:
                out[(m.value, t.value)] = (math.nan, math.nan)
    return out


def _fit_replicate(cfg: SimConfig, replicate: int, B: int, n_test: int, threads=None):
    data_seed, forest_seed = _replicate_seeds(cfg.seed, replicate)
    train, test = generate_dataset(cfg.n, cfg.p, cfg.snr, cfg.task, cfg.base_rate,
                                   data_seed, n_test, cfg.noise_sd)
    model = train_forest(train, cfg.forest_config(forest_seed, B), threads=threads)
    return train, test, model


def run_replicate(cfg: SimConfig, replicate: int, threads=None) -> CoverageRecord:
    train, test, model = _fit_replicate(cfg, replicate, cfg.B, cfg.n_test, threads)
    P = tree_prediction_matrix(model)
    try:
        rep = se_report(P, model.inbag, train.y, cfg.task)
    except InsufficientTreesError as exc:
        raise InsufficientTreesError(f"replicate {replicate}: {exc}", exc.rows) from exc
    loss = default_loss(cfg.task)
    truth = float(np.mean(loss(test.y, predict(model, test.X))))
    se = {m.value: rep.se(m) for m in METHODS}
    return CoverageRecord(
        replicate=replicate,
        err_oob=rep.err_oob,
        truth=truth,
        se=se,
        intervals=_intervals(rep.err_oob, se, cfg.alpha, cfg.transforms),
        setting=cfg.setting(),
    )


def run_simulation(cfg: SimConfig, replicates: Optional[Iterable[int]] = None,
                   threads=None, progress=None) -> list[CoverageRecord]:
    reps = range(cfg.R) if replicates is None else replicates
    out = []
    for k, r in enumerate(reps):
        out.append(run_replicate(cfg, r, threads))
        if progress is not None:
            progress(k + 1)
        elif (k + 1) % 50 == 0:
            log.info("setting %s: %d replicates done", cfg.setting(), k + 1)
    return out


@dataclass(frozen=True)
class ReportCell:
    setting: tuple
    method: str
    transform: str
    replicates: int
    miscoverage: float
    miscover_high: float
    miscover_low: float
    undefined: int
    mean_width: float
    mean_err_oob: float
    mean_truth: float

    def as_row(self, setting_keys) -> dict:
        row = dict(zip(setting_keys, self.setting))
        row.update(
            method=self.method, transform=self.transform, replicates=self.replicates,
            miscoverage=self.miscoverage, miscover_high=self.miscover_high,
            miscover_low=self.miscover_low, undefined=self.undefined,
            mean_width=self.mean_width, mean_err_oob=self.mean_err_oob,
            mean_truth=self.mean_truth,
        )
        return row


SETTING_KEYS = ("n", "p", "snr", "task", "B", "alpha")


def coverage_report(records: Sequence[CoverageRecord]) -> list[ReportCell]:
    """Miscoverage (total / high / low) and mean widths per setting,
    method and transform. Replicates whose interval is undefined are
    excluded from the rates and counted separately."""
    if not records:
        raise InputError("coverage report needs at least one record")
    groups = defaultdict(list)
    for rec in records:
        groups[tuple(rec.setting.get(k) for k in SETTING_KEYS)].append(rec)
    cells = []
    for setting, recs in groups.items():
        keys = sorted({k for r in recs for k in r.intervals},
                      key=lambda mt: (METHODS.index(Method(mt[0])), list(Transform).index(Transform(mt[1]))))
        mean_err = float(np.mean([r.err_oob for r in recs]))
        mean_truth = float(np.mean([r.truth for r in recs]))
        for m, t in keys:
            flags = [r.flag(m, t) for r in recs if (m, t) in r.intervals]
            ok = [r for r in recs if (m, t) in r.intervals and r.flag(m, t) != "undefined"]
            k = len(ok)
            high = sum(f == "high" for f in flags)
            low = sum(f == "low" for f in flags)
            widths = [r.intervals[(m, t)][1] - r.intervals[(m, t)][0] for r in ok]
            cells.append(ReportCell(
                setting=setting, method=m, transform=t, replicates=k,
                miscoverage=(high + low) / k if k else math.nan,
                miscover_high=high / k if k else math.nan,
                miscover_low=low / k if k else math.nan,
                undefined=len(flags) - k,
                mean_width=float(np.mean(widths)) if widths else math.nan,
                mean_err_oob=mean_err, mean_truth=mean_truth,
            ))
    return cells


def find_cell(cells, method, transform="identity", **setting) -> ReportCell:
    m, t = Method.parse(method).value, Transform.parse(transform).value
    for c in cells:
        s = dict(zip(SETTING_KEYS, c.setting))
        if c.method == m and c.transform == t and all(s.get(k) == v for k, v in setting.items()):
            return c
    raise KeyError((method, transform, setting))


@dataclass(frozen=True)
class CurvePoint:
    B: int
    method: str
    mean_se: float
    se_of_mean_se: float
    sd_err_oob: float
    ratio: float
    ratio_se: float


def sd_curve(cfg: SimConfig, B_grid: Sequence[int], threads=None) -> list[CurvePoint]:
    """Mean SE estimate over replicates divided by the empirical SD of the
    OOB error across replicates, for each forest size in ``B_grid``.

    Each replicate grows one forest of ``max(B_grid)`` trees; smaller
    forests are its leading trees.
    """
    grid = [int(b) for b in B_grid]
    if not grid or any(b < 1 for b in grid) or grid != sorted(set(grid)):
        raise InputError("B_grid must be strictly ascending positive integers")
    if cfg.R < 2:
        raise InputError("sd_curve needs R >= 2 replicates for an SD of the OOB error")
    errs = np.empty((len(grid), cfg.R))
    ses = {m.value: np.empty((len(grid), cfg.R)) for m in METHODS}
    for r in range(cfg.R):
        train, _, model = _fit_replicate(cfg, r, grid[-1], 1, threads)
        P = tree_prediction_matrix(model)
        for g, B in enumerate(grid):
            rep = se_report(P[:, :B], model.inbag[:, :B], train.y, cfg.task)
            errs[g, r] = rep.err_oob
            for m in METHODS:
                ses[m.value][g, r] = rep.se(m)
        if (r + 1) % 10 == 0:
            log.info("sd-curve: %d/%d replicates", r + 1, cfg.R)
    out = []
    for g, B in enumerate(grid):
        sd = float(np.std(errs[g], ddof=1))
        for m in METHODS:
            v = ses[m.value][g]
            mean = float(v.mean())
            sem = float(v.std(ddof=1) / math.sqrt(cfg.R))
            ratio = mean / sd if sd > 0 else math.inf
            out.append(CurvePoint(B, m.value, mean, sem, sd, ratio,
                                  sem / sd if sd > 0 else math.inf))
    return out


def with_setting(cfg: SimConfig, **changes) -> SimConfig:
    return replace(cfg, **changes)
