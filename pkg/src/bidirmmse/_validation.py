"""Input validation helpers shared by the public functions and estimators."""

import numbers

import numpy as np


def check_positive(value, name, *, integer=False, allow_zero=False):
    """Raise ``ValueError`` unless ``value`` is a positive (or non-negative) number."""
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ValueError(f"{name} must be {'an integer' if integer else 'a real number'}, got {value!r}")
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return value


def check_unit_interval(value, name, *, closed_low=True, closed_high=True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    low_ok = value >= 0 if closed_low else value > 0
    high_ok = value <= 1 if closed_high else value < 1
    if not (low_ok and high_ok):
        raise ValueError(f"{name} must lie in {'[' if closed_low else '('}0, 1{']' if closed_high else ')'}, got {value!r}")
    return float(value)


def check_vector(x, name, length=None):
    """Return ``x`` as a 1-D complex array, checking its length if given."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr.astype(complex, copy=False)


def check_square(a, name, size=None):
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} is {arr.shape[0]}x{arr.shape[0]}, expected {size}x{size}")
    return arr.astype(complex, copy=False)


def check_symbols(b, name="symbols"):
    """Return ``b`` as a float array after checking every entry is +1 or -1."""
    arr = np.asarray(b, dtype=float)
    if not np.all(np.abs(arr) == 1.0):
        raise ValueError(f"{name} must contain only +1/-1 values")
    return arr


def check_received(X, n_dims=None):
    """Validate a block of received vectors, one row per symbol interval."""
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ValueError(f"received data must be 2-D (n_symbols, M), got shape {arr.shape}")
    if n_dims is not None and arr.shape[1] != n_dims:
        raise ValueError(f"received vectors have length {arr.shape[1]}, expected {n_dims}")
    arr = arr.astype(complex, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError("received data contains non-finite values")
    return arr
