"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

__all__ = ["as_float_matrix", "as_float_vector", "check_labels", "check_square", "symmetrize"]


def as_float_matrix(values, name="values"):
    """Return a finite 2-d float64 array, raising ValueError otherwise."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def as_float_vector(values, name="values"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_labels(labels, n_rows, n_groups=None):
    """Validate group indices in 1..K.

    With n_groups=None, K is the largest label and every group must be
    non-empty (training contract). An explicit n_groups fixes K and allows
    empty groups, as in a test set whose labels were sampled at random.
    """
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.shape[0] != n_rows:
        raise ValueError("labels must be a 1-d array matching the number of rows")
    if not np.issubdtype(arr.dtype, np.integer):
        flo = np.asarray(labels, dtype=np.float64)
        if not np.all(flo == np.round(flo)):
            raise ValueError("labels must be integers")
        arr = flo.astype(np.int64)
    arr = arr.astype(np.int64)
    if arr.min() < 1:
        raise ValueError("labels must be group indices starting at 1")
    if n_groups is not None:
        k = int(n_groups)
        if k < 1 or arr.max() > k:
            raise ValueError(f"labels must lie in 1..{k}")
        return arr, k
    k = int(arr.max())
    present = np.unique(arr)
    if present.shape[0] != k:
        missing = sorted(set(range(1, k + 1)) - set(present.tolist()))
        raise ValueError(f"every group in 1..{k} must be non-empty, missing {missing}")
    return arr, k


def check_square(mat, name="matrix"):
    arr = np.asarray(mat, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def symmetrize(mat):
    # (M + M.T)/2 is bitwise symmetric because IEEE addition commutes.
    return (mat + mat.T) / 2.0
