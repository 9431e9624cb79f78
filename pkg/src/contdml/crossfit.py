"""Sample splitting and out-of-fold nuisance fitting."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from contdml import learners
from contdml.data import Dataset, EstimationConfig, TreatmentGrid
from contdml.gps import fit_gps
from contdml.learners import make_features


def child_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit seed derived from ``seed`` and integer keys."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint64)[0] >> 1)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    n: int
    n_folds: int
    fold_of: np.ndarray  # 0-based fold index per observation

    def members(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def training(self, fold: int) -> np.ndarray:
        """Rows used to fit fold ``fold``'s nuisances; the full sample when L = 1."""
        if self.n_folds == 1:
            return np.arange(self.n)
        return np.flatnonzero(self.fold_of != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.n_folds)


def make_folds(n: int, n_folds: int, seed: int) -> FoldAssignment:
    """Seeded random permutation dealt round-robin into ``n_folds`` groups."""
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    if n_folds > n:
        raise ValueError(f"n_folds={n_folds} exceeds n={n}")
    perm = np.random.default_rng(child_seed(seed, 0xF01D)).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % n_folds
    fold_of.setflags(write=False)
    return FoldAssignment(n, n_folds, fold_of)


@dataclass(frozen=True)
class GammaFit:
    """gamma(t, x) = E[Y | T = t, X = x] from a learner on (T, X) features."""

    inner: Any
    kind: str
    degree: int = 3

    def predict_at(self, t_eval, x_mat) -> np.ndarray:
        x_mat = np.asarray(x_mat, dtype=float)
        t_mat = np.broadcast_to(np.asarray(t_eval, dtype=float), (x_mat.shape[0], np.size(t_eval)))
        return self.inner.predict(make_features(self.kind, t_mat, x_mat, self.degree))


@dataclass(frozen=True)
class FunctionGamma:
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def predict_at(self, t_eval, x_mat) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(t_eval, dtype=float), x_mat), dtype=float)


@dataclass(frozen=True)
class FunctionGps:
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    t_eval: np.ndarray
    floor: float

    def raw(self, x_mat) -> np.ndarray:
        return np.asarray(self.fn(self.t_eval, x_mat), dtype=float)

    def evaluate(self, x_mat) -> np.ndarray:
        return np.maximum(self.raw(x_mat), self.floor)


@dataclass(frozen=True, eq=False)
class FoldNuisances:
    """Per-fold gamma models and per-(fold, grid point) GPS fits.

    ``gps[fold][k]`` is localized at ``grid.points[k]``; ``training_rows[fold]``
    records exactly which observations each fold's models saw.
    """

    grid: TreatmentGrid
    gamma: Sequence[Any]
    gps: Sequence[Sequence[Any]]
    training_rows: Sequence[np.ndarray]

    def grid_index(self, t_eval) -> int:
        t_eval = np.asarray(t_eval, dtype=float).reshape(-1)
        hits = np.flatnonzero(np.all(np.isclose(self.grid.points, t_eval, rtol=0, atol=1e-12), axis=1))
        if hits.size == 0:
            raise KeyError(f"no nuisances were fit at t = {t_eval}")
        return int(hits[0])

    @classmethod
    def from_functions(cls, folds: FoldAssignment, grid: TreatmentGrid, gamma_fn, gps_fn,
                       floor: float = 0.0) -> "FoldNuisances":
        """Inject known nuisance functions ``gamma_fn(t, X)`` and ``gps_fn(t, X)``."""
        gamma = [FunctionGamma(gamma_fn)] * folds.n_folds
        gps = [[FunctionGps(gps_fn, p, floor) for p in grid.points] for _ in range(folds.n_folds)]
        rows = [folds.training(f) for f in range(folds.n_folds)]
        return cls(grid, gamma, gps, rows)


def fit_fold_nuisances(data: Dataset, folds: FoldAssignment, grid: TreatmentGrid,
                       config: EstimationConfig, threads: int = 1) -> FoldNuisances:
    """Step 1: for every fold fit gamma once on the complement, and the GPS per grid point."""
    if folds.n != data.n:
        raise ValueError("fold assignment does not match the data")
    if grid.d_t != data.d_t:
        raise ValueError("grid dimension does not match the treatment dimension")
    g_spec = config.learner
    f_spec = config.gps_spec
    rows = [folds.training(f) for f in range(folds.n_folds)]
    for r in rows:
        if r.size < 2:
            raise ValueError("each training complement needs at least 2 observations")

    def gamma_job(f):
        sub = data.subset(rows[f])
        feats = make_features(g_spec.kind, sub.t_mat, sub.x_mat, g_spec.degree)
        inner = learners.fit(g_spec, feats, sub.y, child_seed(config.seed, 1, f))
        return GammaFit(inner, g_spec.kind, g_spec.degree)

    def gps_job(f):
        sub = data.subset(rows[f])
        feats = make_features(f_spec.kind, None, sub.x_mat, f_spec.degree)
        return [
            fit_gps(f_spec, sub, p, config.h1, config.density_floor,
                    child_seed(config.seed, 2, f, k), features=feats)
            for k, p in enumerate(grid.points)
        ]

    n_f = folds.n_folds
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            gamma = list(pool.map(gamma_job, range(n_f)))
            gps = list(pool.map(gps_job, range(n_f)))
    else:
        gamma = [gamma_job(f) for f in range(n_f)]
        gps = [gps_job(f) for f in range(n_f)]
    return FoldNuisances(grid, gamma, gps, rows)
