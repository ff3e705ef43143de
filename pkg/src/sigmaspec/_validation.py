"""Small input-validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np

from .exceptions import ValidationError


def check_scalar(x, name, target_type=Real, *, min_val=None, max_val=None,
                 include_boundaries="both"):
    """Validate a scalar parameter's type and bounds and return it."""
    if isinstance(x, bool) or not isinstance(x, target_type):
        raise ValidationError(f"{name} must be {target_type}, got {type(x).__name__}")
    if isinstance(x, Real) and not math.isfinite(x):
        raise ValidationError(f"{name} must be finite, got {x}")
    left = include_boundaries in ("both", "left")
    right = include_boundaries in ("both", "right")
    if min_val is not None and (x < min_val or (not left and x == min_val)):
        op = ">=" if left else ">"
        raise ValidationError(f"{name} == {x}, must be {op} {min_val}")
    if max_val is not None and (x > max_val or (not right and x == max_val)):
        op = "<=" if right else "<"
        raise ValidationError(f"{name} == {x}, must be {op} {max_val}")
    return x


def check_int(x, name, *, min_val=None, max_val=None):
    if isinstance(x, np.integer):
        x = int(x)
    return check_scalar(x, name, Integral, min_val=min_val, max_val=max_val)


def check_interval(interval, name):
    """Return ``(lo, hi)`` as floats with ``lo < hi``."""
    try:
        lo, hi = (float(v) for v in interval)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a pair of reals") from exc
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ValidationError(f"{name} must satisfy lo < hi, got ({lo}, {hi})")
    return lo, hi


def check_finite_array(a, name, ndim=None):
    a = np.asarray(a, dtype=float)
    if ndim is not None and a.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a
