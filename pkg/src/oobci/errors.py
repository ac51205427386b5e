"""Exception hierarchy.

Each class carries a short ``category`` string that the CLI reports as a
machine-readable error kind.
"""


class OOBError(Exception):
    category = "error"


class InputError(OOBError, ValueError):
    category = "input"


class ConfigError(OOBError, ValueError):
    category = "config"


class InsufficientTreesError(OOBError):
    """Some observation has no out-of-bag tree (or pair of trees)."""

    category = "insufficient_trees"

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class NumericError(OOBError, ArithmeticError):
    category = "numeric"


class TransformError(OOBError, ValueError):
    category = "transform"


class NonDifferentiableLossError(OOBError, ValueError):
    category = "non_differentiable_loss"
