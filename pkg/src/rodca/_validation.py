"""Input checks shared by the estimator-style entry points."""
import numpy as np
from sklearn.utils import check_array


def check_mutual_matrix(X, n_racks=None):
    """Return ``X`` as a 2-D numeric array after checking it is a valid affinity matrix.

    A mutual-traffic matrix must be square, symmetric, non-negative and have
    a zero diagonal.
    """
    X = check_array(X, dtype="numeric", ensure_min_samples=1, ensure_min_features=1)
    if X.shape[0] != X.shape[1]:
        raise ValueError(f"mutual matrix must be square, got shape {X.shape}")
    if n_racks is not None and X.shape[0] != n_racks:
        raise ValueError(f"mutual matrix is {X.shape[0]}x{X.shape[0]}, expected {n_racks} racks")
    if np.any(X < 0):
        raise ValueError("mutual matrix has negative entries")
    if np.any(np.diag(X) != 0):
        raise ValueError("mutual matrix must have a zero diagonal")
    symmetric = np.array_equal(X, X.T) if X.dtype.kind in "iu" else np.allclose(X, X.T)
    if not symmetric:
        raise ValueError("mutual matrix must be symmetric")
    return X


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
