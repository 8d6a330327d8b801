"""Input checks shared by the estimators and pipeline functions."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_features(X, *, n_rows: int | None = None, name: str = "X") -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if n_rows is not None and X.shape[0] != n_rows:
        raise ValueError(f"{name} has {X.shape[0]} rows, graph has {n_rows} nodes")
    return X


def check_binary_labels(y, *, allow_unlabeled: bool = False) -> np.ndarray:
    """Labels as int64; ``-1`` marks unlabeled nodes when allowed."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    allowed = {0, 1, -1} if allow_unlabeled else {0, 1}
    bad = set(np.unique(y).tolist()) - allowed
    if bad:
        raise ValueError(f"labels must be in {sorted(allowed)}, got {sorted(bad)}")
    return y


def check_index_set(idx, n: int, name: str = "index") -> np.ndarray:
    """Accept a boolean mask or an integer index array; return sorted unique ints."""
    idx = np.asarray(idx)
    if idx.dtype == bool:
        if idx.shape != (n,):
            raise ValueError(f"{name} mask must have length {n}")
        return np.flatnonzero(idx)
    idx = np.unique(idx.astype(np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError(f"{name} out of range [0, {n})")
    return idx
