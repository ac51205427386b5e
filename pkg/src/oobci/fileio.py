"""CSV datasets, matrix bundles, simulation records and run manifests.

Matrix bundle layout (``<stem>.csv`` plus ``<stem>.json`` sidecar)::

    y,pred_0,...,pred_{B-1},inbag_0,...,inbag_{B-1}

one row per training observation. ``pred_b`` holds tree ``b``'s prediction
for the row and ``inbag_b`` how often the row was drawn for tree ``b``.
Floats are written in shortest round-trip form, so export followed by
import is bit-exact. The sidecar records ``n``, ``B``, ``task`` and the
SHA-256 of the CSV.

Records CSV: one row per replicate with the setting columns
(``n,p,snr,task,B,alpha``), ``replicate,err_oob,truth``, one
``se_<method>`` column per method and ``lo_/hi_/flag_<method>_<transform>``
columns per interval.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .forest import Dataset, Task
from .intervals import Method, Transform
from .sim import METHODS, SETTING_KEYS, CoverageRecord

__all__ = [
    "load_csv",
    "split_train_test",
    "MatrixBundle",
    "save_bundle",
    "load_bundle",
    "write_records",
    "read_records",
    "write_rows",
    "sha256_file",
    "RunManifest",
    "fmt_float",
]


def fmt_float(x) -> str:
    return repr(float(x))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_csv(path, response, task="regression") -> Dataset:
    """Read a numeric CSV with a header row; ``response`` names the y column."""
    task = Task.parse(task)
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file")
        if response not in header:
            raise InputError(
                f"{path}: response column {response!r} not found; available columns: "
                + ", ".join(header)
            )
        if len(header) < 2:
            raise InputError(f"{path}: need at least one feature column besides the response")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
                )
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric or missing value")
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    arr = np.array(rows, dtype=np.float64)
    k = header.index(response)
    y = arr[:, k]
    X = np.delete(arr, k, axis=1)
    if task is Task.CLASSIFICATION and not np.all((y == 0) | (y == 1)):
        bad = int(np.flatnonzero((y != 0) & (y != 1))[0]) + 2
        raise InputError(f"{path}:{bad}: classification response must be 0 or 1")
    return Dataset(X, y, task)


def split_train_test(data: Dataset, train_fraction: float, seed: int = 0):
    """Random partition; the training part has ``ceil(fraction * n)`` rows."""
    if not 0.0 < train_fraction < 1.0:
        raise InputError("train_fraction must lie in (0, 1)")
    n = data.n
    # round first so that e.g. 0.3 * 10 does not ceil to 4
    n_train = math.ceil(round(train_fraction * n, 9))
    if n_train < 2 or n - n_train < 1:
        raise InputError(
            f"train fraction {train_fraction} of n={n} gives {n_train} training / "
            f"{n - n_train} test rows; need >= 2 and >= 1"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))


@dataclass(frozen=True, eq=False)
class MatrixBundle:
    P: np.ndarray
    N: np.ndarray
    y: np.ndarray
    task: Task = Task.REGRESSION

    def __post_init__(self):
        P = np.ascontiguousarray(self.P, dtype=np.float64)
        N = np.ascontiguousarray(self.N)
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if P.ndim != 2 or P.shape != N.shape or y.shape[0] != P.shape[0]:
            raise InputError(f"inconsistent bundle shapes P{P.shape} N{N.shape} y{y.shape}")
        if not np.issubdtype(N.dtype, np.integer):
            if not np.all(N == np.round(N)):
                raise InputError("inbag counts must be integers")
            N = np.ascontiguousarray(N, dtype=np.int64)
        if np.any(N < 0):
            raise InputError("inbag counts must be nonnegative")
        n = P.shape[0]
        bad = np.flatnonzero(N.sum(axis=0) != n)
        if bad.size:
            raise InputError(f"inbag column {int(bad[0])} sums to {int(N[:, bad[0]].sum())}, not n={n}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "task", Task.parse(self.task))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def B(self) -> int:
        return self.P.shape[1]


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_bundle(bundle: MatrixBundle, path) -> Path:
    path = Path(path)
    B = bundle.B
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [f"pred_{b}" for b in range(B)] + [f"inbag_{b}" for b in range(B)])
        for i in range(bundle.n):
            w.writerow([fmt_float(bundle.y[i])]
                       + [fmt_float(v) for v in bundle.P[i]]
                       + [str(int(v)) for v in bundle.N[i]])
    meta = {"format": "oobci-bundle/1", "n": bundle.n, "B": B, "task": bundle.task.value,
            "csv": path.name, "sha256": sha256_file(path)}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_bundle(path, task=None) -> MatrixBundle:
    """Load a bundle; the sidecar is optional for externally produced CSVs."""
    path = Path(path)
    side = _sidecar(path)
    meta = {}
    if side.exists():
        meta = json.loads(side.read_text())
        if meta.get("sha256") and meta["sha256"] != sha256_file(path):
            raise InputError(f"{path}: digest does not match {side.name}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty bundle")
        rows = list(reader)
    if not header or header[0] != "y":
        raise InputError(f"{path}: first column must be 'y'")
    pred_cols = [k for k, h in enumerate(header) if h.startswith("pred_")]
    inbag_cols = [k for k, h in enumerate(header) if h.startswith("inbag_")]
    if not pred_cols or len(pred_cols) != len(inbag_cols):
        raise InputError(f"{path}: need matching pred_* and inbag_* columns")
    try:
        data = [[float(c) for c in row] for row in rows if row]
    except ValueError:
        raise InputError(f"{path}: non-numeric entry")
    if any(len(r) != len(header) for r in data):
        raise InputError(f"{path}: ragged rows")
    arr = np.array(data, dtype=np.float64)
    if meta and (arr.shape[0] != meta.get("n") or len(pred_cols) != meta.get("B")):
        raise InputError(f"{path}: shape disagrees with {side.name}")
    task = task or meta.get("task", "regression")
    return MatrixBundle(arr[:, pred_cols], arr[:, inbag_cols], arr[:, 0], task)


def _record_columns(transforms) -> list[str]:
    cols = list(SETTING_KEYS) + ["replicate", "err_oob", "truth"]
    cols += [f"se_{m.value}" for m in METHODS]
    for m in METHODS:
        for t in transforms:
            cols += [f"lo_{m.value}_{t}", f"hi_{m.value}_{t}", f"flag_{m.value}_{t}"]
    return cols


def write_records(records, path) -> None:
    transforms = []
    for r in records:
        for _, t in r.intervals:
            if t not in transforms:
                transforms.append(t)
    transforms.sort(key=lambda t: list(Transform).index(Transform(t)))
    cols = _record_columns(transforms)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in records:
            row = {k: r.setting.get(k, "") for k in SETTING_KEYS}
            row.update(replicate=r.replicate, err_oob=fmt_float(r.err_oob), truth=fmt_float(r.truth))
            for m in METHODS:
                row[f"se_{m.value}"] = fmt_float(r.se[m.value])
            for (m, t), (lo, hi) in r.intervals.items():
                row[f"lo_{m}_{t}"] = fmt_float(lo)
                row[f"hi_{m}_{t}"] = fmt_float(hi)
                row[f"flag_{m}_{t}"] = r.flag(m, t)
            w.writerow(row)


def read_records(path) -> list[CoverageRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return out
        keys = []
        for col in reader.fieldnames:
            if col.startswith("lo_"):
                rest = col[3:]
                t = rest.rsplit("_", 1)[1]
                m = rest[: -(len(t) + 1)]
                keys.append((Method.parse(m).value, Transform.parse(t).value))
        for lineno, row in enumerate(reader, start=2):
            try:
                setting = {}
                for k in SETTING_KEYS:
                    v = row.get(k, "")
                    if k == "task":
                        setting[k] = v
                    elif k in ("n", "p", "B"):
                        setting[k] = int(v)
                    else:
                        setting[k] = float(v)
                out.append(CoverageRecord(
                    replicate=int(row["replicate"]),
                    err_oob=float(row["err_oob"]),
                    truth=float(row["truth"]),
                    se={m.value: float(row[f"se_{m.value}"]) for m in METHODS},
                    intervals={(m, t): (float(row[f"lo_{m}_{t}"]), float(row[f"hi_{m}_{t}"]))
                               for m, t in keys},
                    setting=setting,
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise InputError(f"{path}:{lineno}: malformed record ({exc})")
    return out


def write_rows(rows, path) -> None:
    """Write a list of dicts as CSV (floats in round-trip form)."""
    if not rows:
        raise InputError("nothing to write")
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: fmt_float(v) if isinstance(v, float) else v for k, v in r.items()})


@dataclass
class RunManifest:
    command: str
    argv: list
    config: dict
    seed: int | None
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    started: str = field(default_factory=lambda: _now())
    finished: str | None = None

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def versions(self) -> dict:
        from . import __version__
        from ._backend import BACKEND

        return {"oobci": __version__, "numpy": np.__version__,
                "python": platform.python_version(), "backend": BACKEND}

    def write(self, path) -> None:
        self.finished = _now()
        doc = {
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "versions": self.versions(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started": self.started,
            "finished": self.finished,
            "platform": sys.platform,
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
