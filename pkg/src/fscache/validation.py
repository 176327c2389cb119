"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, NonFiniteError


def check_feature_matrix(X, dimension: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float64 array, optionally checking width."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D feature matrix, got shape {arr.shape}")
    if arr.shape[1] == 0:
        raise DimensionMismatchError("feature matrix has zero columns")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("feature matrix contains NaN or Inf")
    if dimension is not None and arr.shape[1] != dimension:
        raise DimensionMismatchError(
            f"cache dimension {dimension} != query dimension {arr.shape[1]}"
        )
    return arr


def check_binary_targets(y, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate targets and return (classes, indices into classes).

    At most two classes; their sorted order defines the slot layout
    (slot 0 plays the "real" role for tie-breaking, slot 1 is the F1
    positive).
    """
    arr = np.asarray(y)
    if arr.ndim != 1 or arr.shape[0] != n_rows:
        raise DimensionMismatchError(f"y has shape {arr.shape}, expected ({n_rows},)")
    classes, indices = np.unique(arr, return_inverse=True)
    if classes.shape[0] > 2:
        raise ValueError(f"expected at most 2 classes, got {classes.shape[0]}")
    return classes, indices.astype(np.int64)
