"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array with at least one row and column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    return X


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array; rejects empty input."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return x


def check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def as_binary_labels(y, name: str = "y") -> np.ndarray:
    """Coerce labels to a 1-D int array of {0, 1}."""
    y = np.asarray(y)
    if y.dtype == bool:
        y = y.astype(np.int64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError(f"{name} must contain only 0/1 (or boolean) labels")
    return y.astype(np.int64)


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
