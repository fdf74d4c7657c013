"""Input checks shared by the estimator layer."""

from __future__ import annotations

import numpy as np


def check_tile_batch(X, size: int, channels: int) -> np.ndarray:
    """Coerce to (n, size, size, channels) float64 in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 4:
        raise ValueError(
            f"expected a 4-D tile batch (n, size, size, channels), got {X.ndim}-D"
        )
    if X.shape[1:] != (size, size, channels):
        raise ValueError(
            f"expected tiles of shape ({size}, {size}, {channels}), got {X.shape[1:]}"
        )
    if not np.isfinite(X).all():
        raise ValueError("tile batch contains non-finite values")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("tile values must lie in [0, 1]; scale 8-bit pixels by 1/255")
    return X


def check_binary_labels(y, n: int) -> np.ndarray:
    """Coerce to (n,) int64 of {0, 1}."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    y = y.astype(np.int64)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y


def check_probability_pairs(X) -> np.ndarray:
    """Coerce to (n, 2) float64 of probabilities."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"expected (n, 2) probability pairs, got shape {X.shape}")
    if not np.isfinite(X).all() or X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    return X
