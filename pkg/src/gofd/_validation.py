"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np


def check_order(s, allow_limits=False):
    """Return the fractional order ``s`` as a float, rejecting values outside (0, 1).

    ``allow_limits`` admits the closed interval; it exists for oracle checks
    against the s -> 0 and s -> 1 limits.
    """
    s = getattr(s, "s", s)
    if isinstance(s, bool) or not isinstance(s, numbers.Real):
        raise TypeError("fractional order must be a real number, got %r" % (s,))
    s = float(s)
    if allow_limits:
        if not 0.0 <= s <= 1.0:
            raise ValueError("fractional order must lie in [0, 1], got %r" % s)
    elif not 0.0 < s < 1.0:
        raise ValueError("fractional order must lie in the open interval (0, 1), got %r" % s)
    return s


def check_points(points, name="points", min_points=0):
    """Validate a point set and return it as a C-contiguous (n, 2) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("%s must have shape (n, 2), got %s" % (name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite coordinates" % name)
    if arr.shape[0] < min_points:
        raise ValueError("%s needs at least %d points, got %d" % (name, min_points, arr.shape[0]))
    return np.ascontiguousarray(arr)


def check_point(p):
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ValueError("expected a finite 2D point, got %r" % (p,))
    return float(arr[0]), float(arr[1])


def check_positive(value, name, strict=True):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise TypeError("%s must be a finite real number, got %r" % (name, value))
    if strict and value <= 0:
        raise ValueError("%s must be positive, got %r" % (name, value))
    if not strict and value < 0:
        raise ValueError("%s must be nonnegative, got %r" % (name, value))
    return float(value)


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError("%s must be an integer, got %r" % (name, value))
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError("%s must be >= %d, got %d" % (name, minimum, value))
    return value


def check_vector(v, length, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != length:
        from .exceptions import DimensionMismatch

        raise DimensionMismatch(
            "%s must be a 1D array of length %d, got shape %s" % (name, length, arr.shape)
        )
    return arr
