"""Feature construction for the nuisance regressions."""
from __future__ import annotations

from typing import Optional

import numpy as np


def basis_size(d_t: int, d_x: int, degree: int = 3) -> int:
    return degree * d_x + degree * d_t + d_x * d_t


def polynomial_basis(t_mat: Optional[np.ndarray], x_mat: np.ndarray, degree: int = 3) -> np.ndarray:
    """Per-coordinate powers 1..degree of every X_j and T_k, then the products X_j * T_k.

    Column order: X_1, X_1^2, .., X_dx^degree, T_1, .., T_dt^degree, X_1 T_1, X_2 T_1, ...
    With ``t_mat`` None only the X powers are returned.
    """
    x_mat = np.asarray(x_mat, dtype=float)
    blocks = [_powers(x_mat, degree)]
    if t_mat is not None:
        t_mat = np.asarray(t_mat, dtype=float)
        blocks.append(_powers(t_mat, degree))
        for k in range(t_mat.shape[1]):
            blocks.append(x_mat * t_mat[:, k : k + 1])
    return np.hstack(blocks)


def _powers(m: np.ndarray, degree: int) -> np.ndarray:
    n, d = m.shape
    out = np.empty((n, d * degree))
    p = np.ones_like(m)
    for k in range(degree):
        p = p * m
        out[:, k::degree] = p
    return out


def make_features(kind: str, t_mat: Optional[np.ndarray], x_mat: np.ndarray, degree: int = 3) -> np.ndarray:
    """Polynomial basis for the lasso, raw ``[T, X]`` (or ``X``) for everything else."""
    if kind == "lasso":
        return polynomial_basis(t_mat, x_mat, degree)
    if t_mat is None:
        return np.asarray(x_mat, dtype=float)
    return np.hstack([np.asarray(t_mat, dtype=float), np.asarray(x_mat, dtype=float)])
