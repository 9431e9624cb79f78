"""Nadaraya-Watson local-constant regression with a product Gaussian kernel."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_CHUNK = 2048


def rule_of_thumb_bandwidths(features, scale: float = 1.0) -> np.ndarray:
    """sd_j * n^{-1/(4+p)} per feature (population sd)."""
    X = np.asarray(features, dtype=float)
    n, p = X.shape
    return scale * X.std(axis=0) * n ** (-1.0 / (4 + p))


@dataclass(frozen=True)
class KernelRegressionModel:
    train: np.ndarray  # features divided by bandwidth; zero-bandwidth columns dropped
    targets: np.ndarray
    bandwidths: np.ndarray
    keep: np.ndarray
    train_sq: np.ndarray

    def predict(self, features) -> np.ndarray:
        Q = np.asarray(features, dtype=float)[:, self.keep] / self.bandwidths
        out = np.empty(Q.shape[0])
        for s in range(0, Q.shape[0], _CHUNK):
            out[s : s + _CHUNK] = self._predict_block(Q[s : s + _CHUNK])
        return out

    def _predict_block(self, Q):
        if Q.shape[1] == 0:
            return np.full(Q.shape[0], self.targets.mean())
        d2 = (Q * Q).sum(axis=1)[:, None] + self.train_sq[None, :] - 2.0 * (Q @ self.train.T)
        np.maximum(d2, 0.0, out=d2)
        # shift by the nearest neighbour so the largest weight is exp(0) = 1
        d2 -= d2.min(axis=1, keepdims=True)
        w = np.exp(-0.5 * d2)
        tot = w.sum(axis=1)
        pred = (w @ self.targets) / np.where(tot > 0, tot, 1.0)
        bad = ~(np.isfinite(tot) & (tot > 0))
        if bad.any():
            warnings.warn(
                f"{int(bad.sum())} query points had zero kernel weight; using the global mean",
                RuntimeWarning,
                stacklevel=3,
            )
            pred[bad] = self.targets.mean()
        return pred


def fit_kernel_regression(features, targets, bandwidth_scale: float = 1.0,
                          bandwidths=None) -> KernelRegressionModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("kernel regression needs at least 2 rows")
    bw = rule_of_thumb_bandwidths(X, bandwidth_scale) if bandwidths is None else np.asarray(bandwidths, float)
    keep = np.flatnonzero(bw > 0)
    Z = X[:, keep] / bw[keep]
    return KernelRegressionModel(Z, y.copy(), bw[keep], keep, (Z * Z).sum(axis=1))
