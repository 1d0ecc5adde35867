"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.utils import check_array

from .microstructure import Microstructure, load_rve


def check_microstructure(X) -> Microstructure:
    """Accept a Microstructure, an RVE document dict, a JSON string or a path."""
    if isinstance(X, Microstructure):
        return X
    if isinstance(X, (dict, str, Path)):
        return load_rve(X)
    raise TypeError(f"expected a Microstructure, RVE document or path, got {type(X).__name__}")


def check_generalized(X) -> np.ndarray:
    """Coerce generalized strain/stress input to a finite (n, 7) float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    X = check_array(X, dtype=float)
    if X.shape[1] != 7:
        raise ValueError(f"expected 7 generalized components per row, got {X.shape[1]}")
    return X


def check_poro_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (7, 7):
        raise ValueError(f"expected a 7x7 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A
