"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np


def check_data_matrix(X, require_p_le_n=True):
    """Return ``X`` as a finite 2-D float array of shape ``(p, n)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"data matrix must be 2-D, got shape {X.shape}")
    p, n = X.shape
    if p < 1 or n < 1:
        raise ValueError(f"data matrix must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains NaN or infinite entries")
    if require_p_le_n and p > n:
        raise ValueError(f"theory requires p <= n, got p={p}, n={n}")
    return X


def check_dims(p, n):
    p = check_int(p, "p", minimum=1)
    n = check_int(n, "n", minimum=1)
    if p > n:
        raise ValueError(f"theory requires p <= n, got p={p}, n={n}")
    return p, n


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_unit_interval(value, name, closed=False):
    value = float(value)
    ok = 0.0 <= value <= 1.0 if closed else 0.0 < value < 1.0
    if not ok:
        raise ValueError(f"{name} must lie in {'[0, 1]' if closed else '(0, 1)'}, got {value}")
    return value
