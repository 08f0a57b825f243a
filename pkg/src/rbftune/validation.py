"""Input validation helpers shared by the estimators and the data pipeline."""

from __future__ import annotations

import numpy as np


def check_features(X, *, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_binary_labels(y, n_rows: int, *, name: str = "y") -> np.ndarray:
    """Coerce to a 1-D array of 0/1 labels with both classes present."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {y.shape}")
    if y.shape[0] != n_rows:
        raise ValueError(f"{name} has {y.shape[0]} entries for {n_rows} rows")
    values = np.unique(y)
    if not np.isin(values, [0, 1]).all():
        raise ValueError(f"{name} must contain only 0/1 labels, got values {values}")
    if values.size < 2:
        raise ValueError(f"{name} must contain both classes")
    return y.astype(np.int64)


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
