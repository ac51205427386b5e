"""Bagged decision trees with feature subsampling.

Trees are grown by the kernel selected in :mod:`oobci._backend`. Each
tree draws its bootstrap sample and per-node feature subsets from its
own generator seeded with ``(seed, tree_index)``, so the fitted forest
does not depend on how tree growing is scheduled across threads.
"""

from __future__ import annotations

import enum
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _backend
from .errors import ConfigError, InputError

__all__ = [
    "Task",
    "Dataset",
    "ForestConfig",
    "Tree",
    "ForestModel",
    "train_forest",
    "tree_prediction_matrix",
    "predict",
    "save_model",
    "load_model",
    "default_threads",
]

MODEL_FORMAT = "oobci-forest/1"


class Task(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"

    @classmethod
    def parse(cls, value) -> "Task":
        if isinstance(value, Task):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"unknown task {value!r}; expected 'regression' or 'classification'")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, response vector and task tag."""

    X: np.ndarray
    y: np.ndarray
    task: Task = Task.REGRESSION

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        task = Task.parse(self.task)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise InputError("X must be a 2-d matrix")
        if X.shape[0] != y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[1] < 1:
            raise InputError("X needs at least one feature column")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("non-finite entries in dataset")
        if task is Task.CLASSIFICATION and not np.all((y == 0.0) | (y == 1.0)):
            raise InputError("classification responses must be exactly 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "task", task)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.task)


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters.

    ``mtry`` and ``min_node_size`` default to the usual forest choices:
    ``max(1, p // 3)`` and 5 for regression, ``floor(sqrt(p))`` and 1 for
    classification. ``min_node_size`` is the minimum number of (bootstrap)
    rows in each child of a split.
    """

    B: int = 500
    mtry: Optional[int] = None
    min_node_size: Optional[int] = None
    max_depth: Optional[int] = None
    seed: int = 0

    def resolve(self, p: int, task: Task) -> "ForestConfig":
        task = Task.parse(task)
        if int(self.B) < 1:
            raise ConfigError("B must be a positive integer")
        mtry = self.mtry
        if mtry is None:
            mtry = max(1, p // 3) if task is Task.REGRESSION else max(1, int(np.floor(np.sqrt(p))))
        if not 1 <= int(mtry) <= p:
            raise ConfigError(f"mtry={mtry} outside [1, {p}]")
        mns = self.min_node_size
        if mns is None:
            mns = 5 if task is Task.REGRESSION else 1
        if int(mns) < 1:
            raise ConfigError("min_node_size must be positive")
        if self.max_depth is not None and int(self.max_depth) < 1:
            raise ConfigError("max_depth must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return ForestConfig(
            B=int(self.B),
            mtry=int(mtry),
            min_node_size=int(mns),
            max_depth=None if self.max_depth is None else int(self.max_depth),
            seed=int(self.seed),
        )

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "mtry": self.mtry,
            "min_node_size": self.min_node_size,
            "max_depth": self.max_depth,
            "seed": self.seed,
        }


class Tree(NamedTuple):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True, eq=False)
class ForestModel:
    """A fitted forest.

    The node arrays of all trees are concatenated; tree ``b`` occupies
    ``offsets[b]:offsets[b + 1]``. ``inbag[i, b]`` counts how often row
    ``i`` of the training data was drawn for tree ``b``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray
    inbag: np.ndarray
    config: ForestConfig
    task: Task
    n_features: int
    data: Optional[Dataset] = field(default=None)

    @property
    def B(self) -> int:
        return len(self.offsets) - 1

    @property
    def trees(self) -> list[Tree]:
        return [self.tree(b) for b in range(self.B)]

    def tree(self, b: int) -> Tree:
        s, e = self.offsets[b], self.offsets[b + 1]
        return Tree(self.feature[s:e], self.threshold[s:e], self.left[s:e],
                    self.right[s:e], self.value[s:e])

    def head(self, B: int) -> "ForestModel":
        """The sub-forest made of the first ``B`` trees."""
        if not 1 <= B <= self.B:
            raise ConfigError(f"cannot take {B} trees from a forest of {self.B}")
        end = self.offsets[B]
        return ForestModel(
            feature=self.feature[:end],
            threshold=self.threshold[:end],
            left=self.left[:end],
            right=self.right[:end],
            value=self.value[:end],
            offsets=self.offsets[: B + 1],
            inbag=self.inbag[:, :B],
            config=ForestConfig(B, self.config.mtry, self.config.min_node_size,
                                self.config.max_depth, self.config.seed),
            task=self.task,
            n_features=self.n_features,
            data=self.data,
        )

    def _arrays(self):
        return (self.feature, self.threshold, self.left, self.right, self.value, self.offsets)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("OOBCI_THREADS", "1")))
    except ValueError:
        return 1


def _tree_rng(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, b]))


def draw_tree_randomness(seed: int, b: int, n: int, mtry: int):
    """Bootstrap rows and feature-draw uniforms for tree ``b``.

    The bootstrap sample is ``n`` ordered draws with replacement. The
    uniform matrix has one row per split search; ``2n`` rows bound the
    number of nodes of any tree grown on ``n`` rows.
    """
    rng = _tree_rng(seed, b)
    sample = rng.integers(0, n, size=n).astype(np.intp)
    feat_u = rng.random((2 * n, mtry))
    return sample, feat_u


def train_forest(data: Dataset, cfg: ForestConfig, threads: Optional[int] = None,
                 kernels=None) -> ForestModel:
    if data.n < 2:
        raise ConfigError("need at least 2 observations to grow a forest")
    cfg = cfg.resolve(data.p, data.task)
    kernels = kernels or _backend.kernels
    n = data.n
    classification = data.task is Task.CLASSIFICATION
    max_depth = -1 if cfg.max_depth is None else cfg.max_depth

    def grow(b):
        sample, feat_u = draw_tree_randomness(cfg.seed, b, n, cfg.mtry)
        tree = kernels.grow_tree(data.X, data.y, sample, feat_u, classification,
                                 cfg.min_node_size, max_depth)
        return tree, np.bincount(sample, minlength=n)

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(grow, range(cfg.B)))
    else:
        results = [grow(b) for b in range(cfg.B)]

    sizes = np.array([len(t[0][0]) for t in results], dtype=np.int64)
    offsets = np.zeros(cfg.B + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    inbag = np.empty((n, cfg.B), dtype=np.int64)
    for b, (_, counts) in enumerate(results):
        inbag[:, b] = counts
    cat = [np.concatenate([r[0][k] for r in results]) for k in range(5)]
    return ForestModel(
        feature=cat[0], threshold=cat[1], left=cat[2], right=cat[3], value=cat[4],
        offsets=offsets, inbag=inbag, config=cfg, task=data.task,
        n_features=data.p, data=data,
    )


def _check_X(model: ForestModel, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InputError(
            f"X has shape {X.shape}; the forest was trained on {model.n_features} features"
        )
    if not np.all(np.isfinite(X)):
        raise InputError("non-finite entries in X")
    return X


def tree_prediction_matrix(model: ForestModel, X=None, kernels=None) -> np.ndarray:
    """Per-tree predictions ``P[j, b]`` (defaults to the training rows).

    Classification trees emit hard 0/1 votes.
    """
    if X is None:
        if model.data is None:
            raise InputError("model carries no training data; pass X explicitly")
        X = model.data.X
    X = _check_X(model, X)
    kernels = kernels or _backend.kernels
    return kernels.predict_matrix(*model._arrays(), X)


def predict(model: ForestModel, X, kernels=None) -> np.ndarray:
    """Full-forest prediction: tree mean, or majority vote (ties to 0)."""
    X = _check_X(model, X)
    kernels = kernels or _backend.kernels
    mean = kernels.predict_sum(*model._arrays(), X) / model.B
    if model.task is Task.CLASSIFICATION:
        return (mean > 0.5).astype(np.float64)
    return mean


def save_model(model: ForestModel, path) -> None:
    meta = {
        "format": MODEL_FORMAT,
        "task": model.task.value,
        "n_features": model.n_features,
        "config": model.config.to_dict(),
        "has_data": model.data is not None,
    }
    arrays = dict(
        feature=model.feature, threshold=model.threshold, left=model.left,
        right=model.right, value=model.value, offsets=model.offsets, inbag=model.inbag,
    )
    if model.data is not None:
        arrays["train_X"] = model.data.X
        arrays["train_y"] = model.data.y
    with open(path, "wb") as fh:
        np.savez_compressed(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_model(path) -> ForestModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != MODEL_FORMAT:
            raise InputError(f"{path}: not an {MODEL_FORMAT} model file")
        task = Task.parse(meta["task"])
        data = Dataset(z["train_X"], z["train_y"], task) if meta["has_data"] else None
        return ForestModel(
            feature=z["feature"], threshold=z["threshold"], left=z["left"],
            right=z["right"], value=z["value"], offsets=z["offsets"], inbag=z["inbag"],
            config=ForestConfig(**meta["config"]), task=task,
            n_features=int(meta["n_features"]), data=data,
        )
