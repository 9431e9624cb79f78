"""Conditional-mean learners behind one ``fit`` entry point.

Every fitted model exposes ``predict(features) -> ndarray``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from contdml.learners.basis import basis_size, make_features, polynomial_basis
from contdml.learners.forest import ForestModel, fit_random_forest
from contdml.learners.kernel_reg import KernelRegressionModel, fit_kernel_regression
from contdml.learners.lasso import (
    LassoModel,
    cross_validate_lambda,
    fit_lasso,
    lasso_coordinate_descent,
    soft_threshold,
)
from contdml.learners.spec import KINDS, LearnerSpec

__all__ = [
    "KINDS",
    "ConstantModel",
    "ForestModel",
    "KernelRegressionModel",
    "LassoModel",
    "LearnerSpec",
    "basis_size",
    "cross_validate_lambda",
    "fit",
    "fit_kernel_regression",
    "fit_lasso",
    "fit_random_forest",
    "lasso_coordinate_descent",
    "make_features",
    "polynomial_basis",
    "soft_threshold",
]


@dataclass(frozen=True)
class ConstantModel:
    value: float

    def predict(self, features) -> np.ndarray:
        return np.full(np.asarray(features).shape[0], self.value)


def fit(spec: LearnerSpec, features, targets, rng_seed: int):
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features must be (n, p) with one target per row")
    if X.shape[0] < spec.min_rows:
        raise ValueError(f"{spec.kind} needs at least {spec.min_rows} rows, got {X.shape[0]}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite value in learner input")
    if spec.kind == "constant":
        return ConstantModel(float(y.mean()))
    if spec.kind == "lasso":
        return fit_lasso(spec, X, y, rng_seed)
    if spec.kind == "kernel_regression":
        return fit_kernel_regression(X, y, spec.bandwidth_scale)
    if spec.kind == "random_forest":
        min_leaf = spec.min_leaf
        if spec.min_leaf_grid is not None:
            min_leaf = _cv_min_leaf(spec, X, y, rng_seed)
        return fit_random_forest(X, y, spec.n_trees, min(min_leaf, X.shape[0]), rng_seed,
                                 spec.feature_fraction)
    raise ValueError(f"unknown learner kind {spec.kind!r}")


def _cv_min_leaf(spec: LearnerSpec, X, y, seed: int) -> int:
    from contdml.learners.lasso import cv_folds

    n = X.shape[0]
    k = min(spec.cv_folds, n)
    fold = cv_folds(n, k, np.random.default_rng(seed))
    best, best_err = None, np.inf
    for leaf in sorted(spec.min_leaf_grid, reverse=True):
        err = 0.0
        for f in range(k):
            tr = fold != f
            if tr.sum() < leaf:
                err = np.inf
                break
            m = fit_random_forest(X[tr], y[tr], spec.n_trees, leaf, seed + f, spec.feature_fraction)
            err += ((y[~tr] - m.predict(X[~tr])) ** 2).sum()
        if err < best_err:
            best, best_err = leaf, err
    return spec.min_leaf if best is None else best
