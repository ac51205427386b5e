"""Pointwise losses ``l(a, b)`` with ``a`` the response and ``b`` the prediction.

``derivative`` is ``dl/db``. Misclassification has none; callers that need
an influence function for 0/1 data use the classification variant in
:mod:`oobci.se` instead.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import InputError, NonDifferentiableLossError

DEVIANCE_CLAMP = 1e-12


class Loss(str, enum.Enum):
    SQUARE = "square"
    ABSOLUTE = "abs"
    DEVIANCE = "deviance"
    MISCLASSIFICATION = "misclassification"

    @classmethod
    def parse(cls, value) -> "Loss":
        if isinstance(value, Loss):
            return value
        aliases = {"absolute": "abs", "l1": "abs", "l2": "square", "squared": "square",
                   "misclass": "misclassification", "binomial": "deviance"}
        key = str(value).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InputError(f"unknown loss {value!r}")

    @property
    def differentiable(self) -> bool:
        return self is not Loss.MISCLASSIFICATION

    def __call__(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if self is Loss.SQUARE:
            return (a - b) ** 2
        if self is Loss.ABSOLUTE:
            return np.abs(a - b)
        if self is Loss.MISCLASSIFICATION:
            return (a != b).astype(np.float64)
        a, b = _deviance_args(a, b)
        return -a * np.log(b) - (1.0 - a) * np.log(1.0 - b)

    def derivative(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if self is Loss.SQUARE:
            return -2.0 * (a - b)
        if self is Loss.ABSOLUTE:
            # sign(0) = 0 at the kink
            return -np.sign(a - b)
        if self is Loss.MISCLASSIFICATION:
            raise NonDifferentiableLossError(
                "misclassification loss has no derivative; use the classification "
                "influence function (classification_delta_influence)"
            )
        a, b = _deviance_args(a, b)
        return -a / b + (1.0 - a) / (1.0 - b)


def _deviance_args(a, b):
    if np.any((a < 0) | (a > 1)) or np.any((b < 0) | (b > 1)):
        raise InputError("binomial deviance needs responses and predictions in [0, 1]")
    return a, np.clip(b, DEVIANCE_CLAMP, 1.0 - DEVIANCE_CLAMP)
