"""Exhaustive "toy forests" over all n**n ordered bootstrap samples.

With every ordered sample present, each with probability ``1/n**n``, the
reweighting identities behind the influence-function and jackknife
formulas hold exactly, which makes these forests useful as test oracles.
The predictors are deterministic functions of the bootstrap sample.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._pycore import _tree_predict
from .errors import ConfigError
from .forest import Dataset, Task

MAX_EXHAUSTIVE_N = 6


class ToyPredictor(str, enum.Enum):
    BOOTSTRAP_MEAN = "bootstrap_mean"
    STUMP = "stump"


@dataclass(frozen=True, eq=False)
class ExhaustiveForest:
    samples: np.ndarray  # (n**n, n) ordered draws, lexicographic
    inbag: np.ndarray  # (n, n**n)
    predictions: np.ndarray  # (n, n**n)
    task: Task
    predictor: ToyPredictor

    @property
    def B(self) -> int:
        return self.inbag.shape[1]


def _stump(data: Dataset, sample: np.ndarray, kernels) -> np.ndarray:
    p = data.p
    # mtry = p: the uniforms are irrelevant, every feature is searched
    tree = kernels.grow_tree(
        data.X, data.y, sample.astype(np.intp), np.zeros((2 * len(sample), p)),
        data.task is Task.CLASSIFICATION, 1, 1,
    )
    return _tree_predict(*tree, data.X)


def exhaustive_forest(data: Dataset, predictor="bootstrap_mean", kernels=None):
    """Enumerate all ordered bootstrap samples of ``data``.

    Returns ``(forest, P)`` where ``P[j, b]`` is the toy tree's prediction
    for row ``j``. ``bootstrap_mean`` predicts the mean response of the
    sample everywhere (for classification, the majority vote of the sample,
    ties to 0); ``stump`` is a depth-one tree using all features.
    """
    predictor = ToyPredictor(predictor)
    n = data.n
    if n > MAX_EXHAUSTIVE_N:
        raise ConfigError(
            f"exhaustive enumeration needs n <= {MAX_EXHAUSTIVE_N} (n**n samples); got n={n}"
        )
    if n < 2:
        raise ConfigError("need at least 2 observations")
    kernels = kernels or _backend.kernels
    samples = np.array(list(itertools.product(range(n), repeat=n)), dtype=np.int64)
    B = samples.shape[0]
    inbag = np.zeros((n, B), dtype=np.int64)
    P = np.empty((n, B), dtype=np.float64)
    for b, s in enumerate(samples):
        inbag[:, b] = np.bincount(s, minlength=n)
        if predictor is ToyPredictor.BOOTSTRAP_MEAN:
            ys = data.y[s]
            if data.task is Task.CLASSIFICATION:
                P[:, b] = 1.0 if 2.0 * ys.sum() > n else 0.0
            else:
                P[:, b] = np.cumsum(ys)[-1] / n
        else:
            P[:, b] = _stump(data, s, kernels)
    forest = ExhaustiveForest(samples, inbag, P, data.task, predictor)
    return forest, P
