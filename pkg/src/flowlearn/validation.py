"""Input validation helpers shared by the estimators."""

import numpy as np


def check_matrix(X, n_features=None, name="X"):
    """Coerce to a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} must have {n_features} columns, "
                         f"got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_labels(y, n_rows, name="y"):
    """Coerce to a 1-D integer class-index array matching the row count."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if y.shape[0] != n_rows:
        raise ValueError(f"{name} has {y.shape[0]} entries for {n_rows} rows")
    if not np.issubdtype(y.dtype, np.integer):
        yi = y.astype(np.int64)
        if not np.array_equal(yi, y):
            raise ValueError(f"{name} must hold integer class indices")
        y = yi
    if y.size and y.min() < 0:
        raise ValueError(f"{name} holds negative class indices")
    return y.astype(np.int64)
