"""Generalized propensity score by regression of a smoothed treatment on X.

f(t|x) is estimated by E[g_{h1}(T - t) | X = x] with a Gaussian g, fitted by
any conditional-mean learner.  The Gaussian has unbounded support, so the
regression target never has a point mass at zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from contdml import learners
from contdml.data import Dataset
from contdml.learners import LearnerSpec, make_features

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def gps_targets(t_mat, t_eval, h1: float) -> np.ndarray:
    """w_i = prod_j g((T_ji - t_j)/h1) / h1^{d_t} with g the standard normal density."""
    if not h1 > 0:
        raise ValueError("h1 must be positive")
    u = (np.asarray(t_mat, dtype=float) - np.asarray(t_eval, dtype=float)) / h1
    d_t = u.shape[1]
    return np.exp(-0.5 * (u * u).sum(axis=1)) / (_SQRT_2PI * h1) ** d_t


@dataclass(frozen=True)
class GpsFit:
    inner: Any
    h1: float
    t_eval: np.ndarray
    floor: float
    kind: str
    degree: int = 3

    def raw(self, x_mat) -> np.ndarray:
        return self.inner.predict(make_features(self.kind, None, x_mat, self.degree))

    def evaluate(self, x_mat) -> np.ndarray:
        return np.maximum(self.raw(x_mat), self.floor)


def fit_gps(learner: LearnerSpec, data: Dataset, t_eval, h1: float, floor: float, seed: int,
            features: Optional[np.ndarray] = None) -> GpsFit:
    """Fit the GPS at one evaluation point.

    ``features`` may carry a precomputed ``make_features(kind, None, X)`` for
    ``data`` so that refits at several ``t_eval`` share the expansion.
    """
    if not h1 > 0:
        raise ValueError("h1 must be positive")
    if floor < 0:
        raise ValueError("floor must be nonnegative")
    t_eval = np.asarray(t_eval, dtype=float).reshape(-1)
    w = gps_targets(data.t_mat, t_eval, h1)
    if features is None:
        features = make_features(learner.kind, None, data.x_mat, learner.degree)
    inner = learners.fit(learner, features, w, seed)
    return GpsFit(inner, float(h1), t_eval, float(floor), learner.kind, learner.degree)


def gps_evaluate(fit: GpsFit, x_mat) -> tuple[np.ndarray, int]:
    """Floored density values and how many of them hit the floor (strictly below it)."""
    raw = fit.raw(np.atleast_2d(np.asarray(x_mat, dtype=float)))
    return np.maximum(raw, fit.floor), int((raw < fit.floor).sum())
