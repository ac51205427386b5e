"""Standard errors for the out-of-bag error.

Four estimates are provided:

* naive: sample SD of the per-observation OOB losses over sqrt(n),
  treating the losses as independent;
* delta (infinitesimal jackknife after bootstrap): sqrt(sum D_i**2) with
  D_i the influence of observation i on the OOB error, computed from the
  covariance between inbag counts and per-tree OOB residuals;
* delta_plus: max(naive, delta);
* JAB (jackknife after bootstrap): jackknife SE of the leave-one-out OOB
  errors, each computed from the trees that also leave that observation out.

None of these grow additional trees.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InsufficientTreesError, NonDifferentiableLossError
from .forest import Task
from .losses import Loss
from .oob import _insufficient, check_matrices, default_loss, oob_error, oob_predictions

__all__ = [
    "Variant",
    "InfluenceVector",
    "JABDiagnostics",
    "SEReport",
    "e_n",
    "naive_se",
    "delta_influence",
    "generic_loss_influence",
    "classification_delta_influence",
    "covariance_adjustment",
    "delta_se",
    "delta_plus_se",
    "jab_leave_one_out",
    "jab_se",
    "se_report",
]

DEGENERATE_WARN_FRACTION = 0.05


class Variant(str, enum.Enum):
    """Centering of the inbag counts in the covariance term.

    ``EXACT_MINUS_ONE`` uses the bootstrap expectation E[N_i] = 1 and is
    exact only when every ordered bootstrap sample is present (exhaustive
    forests). ``SAMPLE_AVERAGE`` centers at the observed mean count per row,
    which is the right choice for a sampled forest. Because the per-tree
    deviations are taken from the OOB mean of the same row, the two
    centerings give the same values up to rounding.
    """

    EXACT_MINUS_ONE = "exact-minus-one"
    SAMPLE_AVERAGE = "sample-average"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, Variant):
            return value
        key = str(value).lower().replace("_", "-")
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown influence variant {value!r}")


@dataclass(frozen=True, eq=False)
class InfluenceVector:
    D: np.ndarray
    variant: Variant
    e_n: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.D, dtype=dtype)

    def __len__(self):
        return len(self.D)


@dataclass(frozen=True)
class JABDiagnostics:
    degenerate_pairs: int
    total_pairs: int
    warning: bool

    @property
    def degenerate_fraction(self) -> float:
        return self.degenerate_pairs / self.total_pairs if self.total_pairs else 0.0


@dataclass(frozen=True, eq=False)
class SEReport:
    err_oob: float
    se_naive: float
    se_delta: float
    se_delta_plus: float
    se_jab: float
    influence: InfluenceVector
    loo_errors: np.ndarray
    per_obs_loss: np.ndarray
    oob_pred: np.ndarray
    loss: Loss
    task: Task
    diagnostics: JABDiagnostics
    extra: dict = field(default_factory=dict)

    def se(self, method) -> float:
        key = getattr(method, "value", method)
        return {
            "naive": self.se_naive,
            "delta": self.se_delta,
            "delta_plus": self.se_delta_plus,
            "jab": self.se_jab,
        }[key]

    def summary(self) -> dict:
        return {
            "task": self.task.value,
            "loss": self.loss.value,
            "n": int(len(self.per_obs_loss)),
            "err_oob": self.err_oob,
            "se_naive": self.se_naive,
            "se_delta": self.se_delta,
            "se_delta_plus": self.se_delta_plus,
            "se_jab": self.se_jab,
            "variant": self.influence.variant.value,
            "jab_degenerate_pairs": self.diagnostics.degenerate_pairs,
            "jab_total_pairs": self.diagnostics.total_pairs,
            "jab_warning": self.diagnostics.warning,
        }


def e_n(n: int) -> float:
    """(1 - 1/n)**(-n), the reciprocal of the chance a row is out of bag."""
    return float(np.exp(-n * np.log(1 - 1 / n)))


def naive_se(q) -> float:
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.shape[0] < 2:
        raise InputError("naive SE needs at least 2 observations")
    return float(np.std(q, ddof=1) / np.sqrt(q.shape[0]))


def _centered_counts(N, variant: Variant) -> np.ndarray:
    N = N.astype(np.float64)
    if variant is Variant.EXACT_MINUS_ONE:
        return N - 1.0
    return N - N.mean(axis=1, keepdims=True)


def _cov_sum(P, N, center, weights, variant):
    """sum_b (N_ib - c_i) * sum_j weights_j I_jb (P_jb - center_j), for each i."""
    oob = (N == 0).astype(np.float64)
    h = weights @ (oob * (P - center[:, None]))
    return _centered_counts(N, variant) @ h


def _prepare(P, N, y, oob_pred):
    P, N, y = check_matrices(P, N, y)
    oob_pred = np.asarray(oob_pred, dtype=np.float64).ravel()
    if oob_pred.shape != y.shape:
        raise InputError("oob_pred length differs from y")
    counts = (N == 0).sum(axis=1)
    if np.any(counts == 0):
        raise _insufficient(np.flatnonzero(counts == 0), N.shape[1])
    return P, N, y, oob_pred


def delta_influence(P, N, y, oob_pred, variant=Variant.SAMPLE_AVERAGE) -> InfluenceVector:
    """Influence values D_i of the squared-error OOB error."""
    P, N, y, oob_pred = _prepare(P, N, y, oob_pred)
    variant = Variant.parse(variant)
    n, B = P.shape
    en = e_n(n)
    r = y - oob_pred
    q = r**2
    first = (q - np.mean(q)) / n
    cov = _cov_sum(P, N, oob_pred, r, variant)
    return InfluenceVector(first + -2.0 * en / n * (cov / B), variant, en)


def generic_loss_influence(P, N, y, oob_pred, loss, variant=Variant.SAMPLE_AVERAGE) -> InfluenceVector:
    """Influence values D_i for any loss with a derivative in its prediction.

    With the square loss this returns exactly the vector of
    :func:`delta_influence`.
    """
    loss = Loss.parse(loss)
    if not loss.differentiable:
        raise NonDifferentiableLossError(
            "misclassification loss is not differentiable; use classification_delta_influence"
        )
    P, N, y, oob_pred = _prepare(P, N, y, oob_pred)
    variant = Variant.parse(variant)
    n, B = P.shape
    en = e_n(n)
    q = loss(y, oob_pred)
    first = (q - np.mean(q)) / n
    cov = _cov_sum(P, N, oob_pred, loss.derivative(y, oob_pred), variant)
    return InfluenceVector(first + en / n * (cov / B), variant, en)


def classification_delta_influence(P, N, y, vote_fraction, oob_pred,
                                   variant=Variant.SAMPLE_AVERAGE) -> InfluenceVector:
    """Influence values for two-class forests with 0/1 tree votes.

    The loss terms use the thresholded OOB prediction; the per-tree
    deviations are taken from the OOB vote fraction of the same row.
    """
    P, N, y, oob_pred = _prepare(P, N, y, oob_pred)
    if not np.all((P == 0.0) | (P == 1.0)):
        raise InputError("classification votes must be 0 or 1")
    vote_fraction = np.asarray(vote_fraction, dtype=np.float64).ravel()
    variant = Variant.parse(variant)
    n, B = P.shape
    en = e_n(n)
    r = y - oob_pred
    q = r**2
    first = (q - np.mean(q)) / n
    cov = _cov_sum(P, N, vote_fraction, r, variant)
    return InfluenceVector(first + -2.0 * en / n * (cov / B), variant, en)


def covariance_adjustment(P, N, y, oob_pred, variant=Variant.SAMPLE_AVERAGE) -> np.ndarray:
    """Per-observation adjustments C_i with D_i = (q_i - mean(q) + C_i) / n.

    Setting C = 0 gives back the naive SE (with a 1/n variance
    denominator).
    """
    P, N, y, oob_pred = _prepare(P, N, y, oob_pred)
    variant = Variant.parse(variant)
    n, B = P.shape
    cov = _cov_sum(P, N, oob_pred, y - oob_pred, variant)
    return -2.0 * e_n(n) * (cov / B)


def delta_se(D) -> float:
    D = np.asarray(D, dtype=np.float64)
    return float(np.sqrt(np.sum(D**2)))


def delta_plus_se(se_naive: float, se_delta: float) -> float:
    return float(max(se_naive, se_delta))


def jab_leave_one_out(P, N, y, task="regression", loss=None):
    """Leave-one-out OOB errors reusing the fitted trees.

    For each left-out row i, row j != i is predicted from the trees where
    both i and j are out of bag. Pairs with no such tree are dropped from
    row i's average and counted in the returned diagnostics.

    Returns ``(loo_errors, diagnostics)``.
    """
    P, N, y = check_matrices(P, N, y)
    task = Task.parse(task)
    loss = default_loss(task) if loss is None else Loss.parse(loss)
    n, B = P.shape
    oob = (N == 0).astype(np.float64)
    both = oob @ oob.T  # both[j, i] = trees with j and i out of bag
    own = np.diag(both)
    if np.any(own == 0):
        raise _insufficient(np.flatnonzero(own == 0), B)
    sums = (P * oob) @ oob.T
    valid = both > 0
    np.fill_diagonal(valid, False)
    pred = np.divide(sums, both, out=np.zeros_like(sums), where=both > 0)
    if task is Task.CLASSIFICATION:
        pred = (pred > 0.5).astype(np.float64)
    losses = np.where(valid, loss(y[:, None], pred), 0.0)
    used = valid.sum(axis=0)
    if np.any(used == 0):
        bad = np.flatnonzero(used == 0)
        raise InsufficientTreesError(
            f"no tree leaves out row {int(bad[0])} together with any other row; grow more trees",
            bad,
        )
    loo = losses.sum(axis=0) / used
    total = n * (n - 1)
    degenerate = int(total - valid.sum())
    warn = degenerate > DEGENERATE_WARN_FRACTION * total
    if warn:
        warnings.warn(
            f"{degenerate} of {total} ordered pairs share no out-of-bag tree; "
            "the jackknife-after-bootstrap SE is unreliable at this B",
            RuntimeWarning,
            stacklevel=2,
        )
    return loo, JABDiagnostics(degenerate, total, warn)


def jab_se(loo_errors) -> float:
    loo = np.asarray(loo_errors, dtype=np.float64).ravel()
    n = loo.shape[0]
    if n < 2:
        raise InputError("jackknife SE needs at least 2 observations")
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def se_report(P, N, y, task="regression", loss=None, variant=Variant.SAMPLE_AVERAGE) -> SEReport:
    """OOB error with all standard-error estimates.

    Regression defaults to the square loss. Classification always uses
    the misclassification loss and the classification influence function.
    """
    P, N, y = check_matrices(P, N, y)
    task = Task.parse(task)
    loss = default_loss(task) if loss is None else Loss.parse(loss)
    variant = Variant.parse(variant)
    if task is Task.CLASSIFICATION and loss is not Loss.MISCLASSIFICATION:
        raise InputError("classification forests use the misclassification loss")
    if task is Task.REGRESSION and loss is Loss.MISCLASSIFICATION:
        raise InputError("misclassification loss needs a classification forest")
    pr = oob_predictions(P, N, task)
    err, q = oob_error(y, pr.oob_pred, loss)
    if task is Task.CLASSIFICATION:
        D = classification_delta_influence(P, N, y, pr.vote_fraction, pr.oob_pred, variant)
    elif loss is Loss.SQUARE:
        D = delta_influence(P, N, y, pr.oob_pred, variant)
    else:
        D = generic_loss_influence(P, N, y, pr.oob_pred, loss, variant)
    loo, diag = jab_leave_one_out(P, N, y, task, loss)
    s_naive = naive_se(q)
    s_delta = delta_se(D.D)
    return SEReport(
        err_oob=err,
        se_naive=s_naive,
        se_delta=s_delta,
        se_delta_plus=delta_plus_se(s_naive, s_delta),
        se_jab=jab_se(loo),
        influence=D,
        loo_errors=loo,
        per_obs_loss=q,
        oob_pred=pr.oob_pred,
        loss=loss,
        task=task,
        diagnostics=diag,
    )
