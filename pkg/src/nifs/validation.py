"""Small input-validation helpers shared across estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError


def check_features(X, name: str = "X", min_rows: int = 1, dim: int | None = None) -> np.ndarray:
    """Validate a frames-by-coefficients array and return it as float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D (frames x dims), got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise InvalidInputError(f"{name} needs at least {min_rows} rows, got {X.shape[0]}")
    if dim is not None and X.shape[1] != dim:
        raise InvalidInputError(f"{name} has dimension {X.shape[1]}, expected {dim}")
    if X.size and not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return X


def check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """Validate aligned score/label vectors; labels become booleans."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise InvalidInputError(
            f"scores and labels must align, got {scores.shape} vs {labels.shape}"
        )
    if scores.size == 0:
        raise InvalidInputError("need at least one trial")
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("scores contain non-finite values")
    return scores, labels
