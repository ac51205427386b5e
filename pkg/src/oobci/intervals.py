"""Normal-approximation confidence intervals for the OOB error.

Intervals can be built on the error scale or on the log / square-root
scale and mapped back (delta method for the transformed statistic).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InputError, TransformError

__all__ = ["Method", "Transform", "ConfidenceInterval", "normal_quantile", "build_interval"]


class Method(str, enum.Enum):
    NAIVE = "naive"
    DELTA = "delta"
    DELTA_PLUS = "delta_plus"
    JAB = "jab"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, Method):
            return value
        key = str(value).lower().replace("-", "_").replace("+", "_plus")
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown method {value!r}")


class Transform(str, enum.Enum):
    IDENTITY = "identity"
    LOG = "log"
    SQRT = "sqrt"

    @classmethod
    def parse(cls, value) -> "Transform":
        if isinstance(value, Transform):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"unknown transform {value!r}")


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    alpha: float
    method: Method | None
    transform: Transform

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


# Wichura (1988), algorithm AS 241 (PPND16)
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coef, x):
    acc = 0.0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


def normal_quantile(q: float) -> float:
    """Standard normal quantile function, accurate to about 1e-16 relative."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise InputError(f"quantile level must lie in (0, 1), got {q}")
    d = q - 0.5
    if abs(d) <= 0.425:
        r = 0.180625 - d * d
        return d * _poly(_A, r) / _poly(_B, r)
    r = q if d < 0 else 1.0 - q
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        x = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        x = _poly(_E, r) / _poly(_F, r)
    return -x if d < 0 else x


def build_interval(err: float, se: float, alpha: float = 0.10, transform="identity",
                   method=None) -> ConfidenceInterval:
    """Two-sided ``100(1 - alpha)%`` interval for the OOB error.

    Uses ``z = normal_quantile(1 - alpha/2)``. The log interval is
    ``exp(log(err) -/+ z*se/err)``; the square-root interval is
    ``(sqrt(err) -/+ z*se/(2*sqrt(err)))**2`` with the lower end clamped at
    zero before squaring.
    """
    transform = Transform.parse(transform)
    method = None if method is None else Method.parse(method)
    err = float(err)
    se = float(se)
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    if not (math.isfinite(err) and math.isfinite(se)):
        raise InputError("err and se must be finite")
    if se < 0:
        raise InputError(f"standard error must be nonnegative, got {se}")
    if transform is not Transform.IDENTITY and err < 0:
        raise TransformError(f"{transform.value} interval needs err >= 0, got {err}")
    if se == 0.0:
        return ConfidenceInterval(err, err, alpha, method, transform)
    z = normal_quantile(1.0 - alpha / 2.0)
    if transform is Transform.IDENTITY:
        lo, hi = err - z * se, err + z * se
    elif err == 0.0:
        raise TransformError(f"{transform.value} interval undefined at err = 0 with se > 0")
    elif transform is Transform.LOG:
        half = z * se / err
        lo = math.exp(math.log(err) - half)
        try:
            hi = math.exp(math.log(err) + half)
        except OverflowError:
            hi = math.inf
    else:
        root = math.sqrt(err)
        half = z * se / (2.0 * root)
        lo, hi = max(root - half, 0.0) ** 2, (root + half) ** 2
    if transform is not Transform.IDENTITY:
        # the exact interval contains err; keep that true after rounding
        lo, hi = min(lo, err), max(hi, err)
    return ConfidenceInterval(lo, hi, alpha, method, transform)
