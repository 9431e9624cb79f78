"""Lasso by cyclic coordinate descent on the covariance (Gram) form.

Objective: (2n)^{-1} ||y - b0 - X b||^2 + lam * ||b||_1, intercept unpenalized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from contdml.learners.spec import LearnerSpec

TOL = 1e-7
MAX_SWEEPS = 10_000
PATIENCE = 10


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@njit(cache=True, nogil=True)
def _sweep(G, c, q, beta, lam, coords):
    maxd = 0.0
    for j in coords:
        gjj = G[j, j]
        if gjj <= 0.0:
            continue
        z = c[j] - q[j] + gjj * beta[j]
        if z > lam:
            new = (z - lam) / gjj
        elif z < -lam:
            new = (z + lam) / gjj
        else:
            new = 0.0
        d = new - beta[j]
        if d != 0.0:
            # G is symmetric; row access is contiguous
            for k in range(q.shape[0]):
                q[k] += G[j, k] * d
            beta[j] = new
            ad = abs(d)
            if ad > maxd:
                maxd = ad
    return maxd


@njit(cache=True, nogil=True)
def _cd_solve(G, c, q, beta, lam, tol, max_sweeps):
    """Minimize at one penalty from the warm start (beta, q = G beta), in place."""
    everything = np.arange(G.shape[0])
    sweeps = 0
    while sweeps < max_sweeps:
        maxd = _sweep(G, c, q, beta, lam, everything)
        sweeps += 1
        if maxd < tol:
            return True
        active = np.flatnonzero(beta)
        while sweeps < max_sweeps:
            maxd = _sweep(G, c, q, beta, lam, active)
            sweeps += 1
            if maxd < tol:
                break
    return False


@njit(cache=True, nogil=True)
def _cd_path(G, c, lambdas, tol, max_sweeps):
    p = G.shape[0]
    beta = np.zeros(p)
    q = np.zeros(p)
    out = np.zeros((lambdas.shape[0], p))
    converged = np.ones(lambdas.shape[0], dtype=np.bool_)
    for li in range(lambdas.shape[0]):
        converged[li] = _cd_solve(G, c, q, beta, lambdas[li], tol, max_sweeps)
        out[li] = beta
    return out, converged


@dataclass(frozen=True)
class LassoFit:
    coef: np.ndarray
    intercept: float
    converged: bool


def lasso_coordinate_descent(features, targets, lam: float) -> LassoFit:
    """Solve the lasso for one penalty; ``features`` are expected to be standardized."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    n = X.shape[0]
    xm = X.mean(axis=0)
    ym = y.mean()
    Xc = X - xm
    G = Xc.T @ Xc / n
    c = Xc.T @ (y - ym) / n
    path, conv = _cd_path(G, c, np.array([float(lam)]), TOL, MAX_SWEEPS)
    if not conv[0]:
        warnings.warn("lasso coordinate descent hit the sweep limit", RuntimeWarning, stacklevel=2)
    beta = path[0]
    return LassoFit(beta, float(ym - xm @ beta), bool(conv[0]))


def lambda_max(features, targets) -> float:
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    return float(np.max(np.abs((X - X.mean(axis=0)).T @ (y - y.mean()))) / X.shape[0])


def lambda_grid(spec: LearnerSpec, features, targets) -> np.ndarray:
    """Decreasing penalty grid; log-spaced from lambda_max unless given explicitly."""
    if spec.lambdas is not None:
        return np.sort(np.asarray(spec.lambdas, dtype=float))[::-1]
    lmax = lambda_max(features, targets)
    if lmax <= 0:
        lmax = 1.0
    return lmax * np.logspace(0.0, np.log10(spec.lambda_min_ratio), spec.n_lambdas)


def cv_folds(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    fold = np.empty(n, dtype=np.int64)
    fold[rng.permutation(n)] = np.arange(n) % k
    return fold


def cross_validate_lambda(spec: LearnerSpec, features, targets, seed: int) -> float:
    """Penalty with the smallest k-fold CV squared error; ties go to the larger penalty."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    grid = lambda_grid(spec, X, y)
    if grid.size == 1:
        return float(grid[0])
    cv_mse = _cv_errors(X, y, grid, spec.cv_folds, seed)
    best = np.flatnonzero(cv_mse <= cv_mse.min())[0]
    return float(grid[best])


def _cv_errors(X, y, grid, k, seed, patience=PATIENCE):
    """CV mean squared error along the decreasing grid.

    All folds advance along the path together.  Once the CV error has failed to
    improve on its running minimum for ``patience`` consecutive penalties the
    remaining (smaller, costlier) penalties are skipped and scored +inf.
    """
    n = X.shape[0]
    k = min(k, n)
    fold = cv_folds(n, k, np.random.default_rng(seed))
    XtX = X.T @ X
    Xty = X.T @ y
    sx = X.sum(axis=0)
    sy = y.sum()
    folds = []
    for f in range(k):
        held = fold == f
        Xh, yh = X[held], y[held]
        ns = n - Xh.shape[0]
        m = (sx - Xh.sum(axis=0)) / ns
        ym = (sy - yh.sum()) / ns
        G = np.ascontiguousarray((XtX - Xh.T @ Xh) / ns - np.outer(m, m))
        c = (Xty - Xh.T @ yh) / ns - m * ym
        folds.append((G, c, np.zeros(X.shape[1]), np.zeros(X.shape[1]), Xh - m, yh - ym))
    mse = np.full(grid.size, np.inf)
    best = np.inf
    stale = 0
    for li, lam in enumerate(grid):
        sse = 0.0
        for G, c, q, beta, Xh, yh in folds:
            _cd_solve(G, c, q, beta, lam, TOL, MAX_SWEEPS)
            sse += ((yh - Xh @ beta) ** 2).sum()
        mse[li] = sse / n
        if mse[li] < best:
            best = mse[li]
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    return mse


@dataclass(frozen=True)
class LassoModel:
    means: np.ndarray
    sds: np.ndarray
    coef: np.ndarray
    intercept: float
    lam: float
    converged: bool

    def predict(self, features) -> np.ndarray:
        Z = (np.asarray(features, dtype=float) - self.means) / self.sds
        return self.intercept + Z @ self.coef


def fit_lasso(spec: LearnerSpec, features, targets, seed: int) -> LassoModel:
    from contdml.data import standardize_columns

    Z, means, sds = standardize_columns(features)
    y = np.asarray(targets, dtype=float)
    lam = cross_validate_lambda(spec, Z, y, seed)
    # warm-started path down to the chosen penalty
    grid = lambda_grid(spec, Z, y)
    path_grid = grid[grid >= lam]
    n = Z.shape[0]
    zm = Z.mean(axis=0)
    Zc = Z - zm
    ym = y.mean()
    path, conv = _cd_path(Zc.T @ Zc / n, Zc.T @ (y - ym) / n, path_grid, TOL, MAX_SWEEPS)
    if not conv[-1]:
        warnings.warn("lasso coordinate descent hit the sweep limit", RuntimeWarning, stacklevel=2)
    beta = path[-1]
    return LassoModel(means, sds, beta, float(ym - zm @ beta), lam, bool(conv[-1]))
