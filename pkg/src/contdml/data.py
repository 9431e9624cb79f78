"""Observational data and configuration containers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from contdml.learners.spec import LearnerSpec


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.array(a, dtype=float, copy=True)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got {m.ndim} dimensions")
    return m


def _check_finite(a: np.ndarray, name: str) -> None:
    bad = ~np.isfinite(a)
    if bad.any():
        loc = np.argwhere(bad)[0]
        row = int(loc[0]) + 1
        if a.ndim == 1:
            raise ValueError(f"non-finite value in {name} at row {row}")
        raise ValueError(f"non-finite value in {name} at row {row}, column {int(loc[1]) + 1}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Outcome ``y`` (n,), treatments ``t_mat`` (n, d_t) and covariates ``x_mat`` (n, d_x).

    Use :func:`dataset_from_columns` to build one; it validates and copies.
    """

    y: np.ndarray
    t_mat: np.ndarray
    x_mat: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d_t(self) -> int:
        return self.t_mat.shape[1]

    @property
    def d_x(self) -> int:
        return self.x_mat.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.y[idx], self.t_mat[idx], self.x_mat[idx])


def dataset_from_columns(y, t_mat, x_mat) -> Dataset:
    y = np.array(y, dtype=float, copy=True)
    if y.ndim != 1:
        raise ValueError("y must be a vector")
    t_mat = _as_matrix(t_mat, "t_mat")
    x_mat = _as_matrix(x_mat, "x_mat")
    n = y.shape[0]
    if t_mat.shape[0] != n or x_mat.shape[0] != n:
        raise ValueError(
            f"length mismatch: y has {n} rows, t_mat {t_mat.shape[0]}, x_mat {x_mat.shape[0]}"
        )
    if n < 2:
        raise ValueError("need at least 2 observations")
    if t_mat.shape[1] < 1 or x_mat.shape[1] < 1:
        raise ValueError("need at least one treatment and one covariate column")
    _check_finite(y, "y")
    _check_finite(t_mat, "t_mat")
    _check_finite(x_mat, "x_mat")
    for a in (y, t_mat, x_mat):
        a.setflags(write=False)
    return Dataset(y, t_mat, x_mat)


@dataclass(frozen=True, eq=False)
class TreatmentGrid:
    """Evaluation points, shape (G, d_t), strictly increasing in lexicographic order."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_matrix(self.points, "points")
        if pts.shape[0] == 0:
            raise ValueError("treatment grid is empty")
        _check_finite(pts, "grid")
        for a, b in zip(pts[:-1], pts[1:]):
            diff = b - a
            nz = np.flatnonzero(diff)
            if nz.size == 0:
                raise ValueError(f"duplicate grid point {tuple(a)}")
            if diff[nz[0]] < 0:
                raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_values(cls, values) -> "TreatmentGrid":
        return cls(np.asarray(values, dtype=float).reshape(len(values), -1))

    @classmethod
    def linspace(cls, lo: float, hi: float, count: int) -> "TreatmentGrid":
        if count < 1:
            raise ValueError("grid count must be >= 1")
        if count > 1 and not lo < hi:
            raise ValueError("grid requires lo < hi")
        return cls.from_values(np.linspace(lo, hi, count) if count > 1 else [lo])

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def d_t(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class EstimationConfig:
    """Tuning for one DML run.

    ``bandwidth_h1`` and ``eta`` default to ``bandwidth_h`` when left as None.
    ``gps_learner`` defaults to ``learner``.
    """

    bandwidth_h: float
    n_folds: int = 5
    bandwidth_h1: Optional[float] = None
    eta: Optional[float] = None
    alpha: float = 0.05
    density_floor: float = 1e-3
    seed: int = 0
    learner: LearnerSpec = field(default_factory=lambda: LearnerSpec("lasso"))
    gps_learner: Optional[LearnerSpec] = None
    kernel: str = "epanechnikov"

    def __post_init__(self):
        if self.n_folds < 1:
            raise ValueError("n_folds must be >= 1")
        if not self.bandwidth_h > 0:
            raise ValueError("bandwidth_h must be positive")
        if self.bandwidth_h1 is not None and not self.bandwidth_h1 > 0:
            raise ValueError("bandwidth_h1 must be positive")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.density_floor < 0:
            raise ValueError("density_floor must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def h1(self) -> float:
        return self.bandwidth_h if self.bandwidth_h1 is None else self.bandwidth_h1

    @property
    def step(self) -> float:
        return self.bandwidth_h if self.eta is None else self.eta

    @property
    def gps_spec(self) -> LearnerSpec:
        return self.learner if self.gps_learner is None else self.gps_learner

    def check_against(self, n: int) -> None:
        if self.n_folds > n:
            raise ValueError(f"n_folds={self.n_folds} exceeds sample size {n}")


def standardize_columns(m):
    """Center each column and scale it to unit population sd.

    Zero-variance columns are only centered and get a recorded sd of 1. A
    column counts as constant when its sd is at rounding level relative to
    its magnitude, so float noise in the mean is not amplified.
    Returns ``(z, means, sds)``.
    """
    m = np.asarray(m, dtype=float)
    means = m.mean(axis=0)
    sds = m.std(axis=0)
    scale = np.abs(m).max(axis=0) if m.size else np.zeros(m.shape[1:])
    sds = np.where(sds > 1e-13 * scale, sds, 1.0)
    return (m - means) / sds, means, sds


def unstandardize_columns(z, means, sds):
    return np.asarray(z) * sds + means
