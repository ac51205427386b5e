"""Out-of-bag predictions, OOB error, and the reweighted OOB statistic.

Conventions: ``P`` is the ``(n, B)`` matrix of per-tree predictions on the
training rows and ``N`` the ``(n, B)`` inbag count matrix. Tree ``b`` is
out of bag for row ``j`` when ``N[j, b] == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, InsufficientTreesError, NumericError
from .forest import Task
from .losses import Loss

__all__ = [
    "OOBPredictions",
    "OOBSummary",
    "check_matrices",
    "oob_predictions",
    "oob_error",
    "oob_summary",
    "reweighted_oob_predictions",
    "weighted_oob_statistic",
    "default_loss",
]


def default_loss(task) -> Loss:
    return Loss.MISCLASSIFICATION if Task.parse(task) is Task.CLASSIFICATION else Loss.SQUARE


def check_matrices(P, N, y=None):
    # C order fixes the summation order of row reductions, so results do
    # not depend on how the caller's arrays are laid out in memory
    P = np.ascontiguousarray(P, dtype=np.float64)
    N = np.ascontiguousarray(N)
    if P.ndim != 2 or P.shape != N.shape:
        raise InputError(f"prediction matrix {P.shape} and inbag matrix {N.shape} differ")
    if np.any(N < 0):
        raise InputError("inbag counts must be nonnegative")
    if not np.all(np.isfinite(P)):
        raise InputError("non-finite per-tree predictions")
    if y is not None:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != P.shape[0]:
            raise InputError(f"y has {y.shape[0]} entries but P has {P.shape[0]} rows")
        return P, N, y
    return P, N


def _insufficient(rows, B):
    rows = [int(r) for r in rows]
    shown = ", ".join(map(str, rows[:10])) + (" ..." if len(rows) > 10 else "")
    return InsufficientTreesError(
        f"{len(rows)} observation(s) are in bag for all {B} trees (rows {shown}); "
        f"grow more trees -- standard errors need at least B/.632 trees "
        f"beyond what stabilises the OOB error",
        rows,
    )


@dataclass(frozen=True, eq=False)
class OOBPredictions:
    oob_pred: np.ndarray
    oob_counts: np.ndarray
    vote_fraction: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class OOBSummary:
    oob_pred: np.ndarray
    oob_counts: np.ndarray
    err_oob: float
    per_obs_loss: np.ndarray
    vote_fraction: np.ndarray | None = None


def oob_predictions(P, N, task="regression") -> OOBPredictions:
    """Average the out-of-bag trees for each row.

    For classification the average is the OOB vote fraction and the
    prediction is 1 only when strictly more than half the votes are 1.
    """
    P, N = check_matrices(P, N)
    task = Task.parse(task)
    oob = (N == 0).astype(np.float64)
    counts = oob.sum(axis=1)
    if np.any(counts == 0):
        raise _insufficient(np.flatnonzero(counts == 0), N.shape[1])
    mean = (P * oob).sum(axis=1) / counts
    if task is Task.CLASSIFICATION:
        if not np.all((P == 0.0) | (P == 1.0)):
            raise InputError("classification votes must be 0 or 1")
        return OOBPredictions((mean > 0.5).astype(np.float64), counts.astype(np.int64), mean)
    return OOBPredictions(mean, counts.astype(np.int64), None)


def oob_error(y, oob_pred, loss=Loss.SQUARE):
    """Return ``(err_oob, per_obs_loss)``."""
    y = np.asarray(y, dtype=np.float64).ravel()
    oob_pred = np.asarray(oob_pred, dtype=np.float64).ravel()
    if y.shape != oob_pred.shape:
        raise InputError("y and oob_pred lengths differ")
    q = Loss.parse(loss)(y, oob_pred)
    return float(np.sum(q) / q.shape[0]), q


def oob_summary(P, N, y, task="regression", loss=None) -> OOBSummary:
    P, N, y = check_matrices(P, N, y)
    loss = default_loss(task) if loss is None else Loss.parse(loss)
    pr = oob_predictions(P, N, task)
    err, q = oob_error(y, pr.oob_pred, loss)
    return OOBSummary(pr.oob_pred, pr.oob_counts, err, q, pr.vote_fraction)


def _snap(eps: float, n: int) -> float:
    # lets eps = -1/(n-1) hit the leave-one-out point exactly
    if abs(1.0 + (n - 1) * eps) < 1e-12:
        return -1.0 / (n - 1)
    return eps


def _log_ratio(N_i, eps: float, n: int) -> np.ndarray:
    """log of g_{eps,i}(b) / g_0(b) for each tree, from the inbag counts of row i."""
    base = (1.0 + (n - 1) * eps) / (1.0 - eps)
    out = np.full(N_i.shape, n * np.log1p(-eps))
    hit = N_i > 0
    if abs(1.0 + (n - 1) * eps) < 1e-12:
        out[hit] = -np.inf
    else:
        out[hit] += N_i[hit] * np.log(base)
    return out


def reweighted_oob_predictions(P, N, i: int, eps: float) -> np.ndarray:
    """OOB averages with tree ``b`` weighted by the importance ratio
    ``(1 - eps)**n * (1 + n*eps/(1 - eps))**N[i, b]``.

    At ``eps = 0`` this is the ordinary OOB average; at ``eps = -1/(n-1)``
    only trees that also leave out row ``i`` contribute.
    """
    P, N = check_matrices(P, N)
    n = P.shape[0]
    if not 0 <= i < n:
        raise InputError(f"observation index {i} out of range")
    eps = _snap(float(eps), n)
    if not (-1.0 / (n - 1) <= eps < 1.0):
        raise InputError(f"eps={eps} outside [-1/(n-1), 1)")
    logr = _log_ratio(N[i], eps, n)
    masked = np.where(N == 0, logr[None, :], -np.inf)
    top = masked.max(axis=1)
    if not np.all(np.isfinite(top)):
        raise NumericError("reweighted OOB denominator is zero for some observation")
    W = np.exp(masked - top[:, None])
    return (P * W).sum(axis=1) / W.sum(axis=1)


def weighted_oob_statistic(P, N, y, i: int, eps: float, loss=None, task="regression") -> float:
    """The OOB error of the forest under observation weights that move
    mass ``eps`` onto row ``i``.

    Each row ``j`` enters with weight ``(1 - eps)/n + eps*[j == i]`` and its
    prediction is the importance-reweighted OOB average. Classification
    thresholds the reweighted vote fraction at one half. ``eps = 0`` gives
    the OOB error exactly.
    """
    P, N, y = check_matrices(P, N, y)
    task = Task.parse(task)
    loss = default_loss(task) if loss is None else Loss.parse(loss)
    n = P.shape[0]
    eps = _snap(float(eps), n)
    pred = reweighted_oob_predictions(P, N, i, eps)
    if task is Task.CLASSIFICATION:
        pred = (pred > 0.5).astype(np.float64)
    q = loss(y, pred)
    w = np.full(n, 1.0 - eps)
    w[i] = 0.0 if eps == -1.0 / (n - 1) else (1.0 - eps) + n * eps
    return float(np.sum(w * q) / n)
