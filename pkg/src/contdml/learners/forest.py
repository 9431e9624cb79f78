"""Random forest of CART regression trees.

Splits are grown on a bootstrap resample and chosen among a random subset of
ceil(fraction * p) features per node by minimizing within-node SSE.  Leaf
values are the mean target of the training rows (not the resample) that land
in the leaf, so a single unsplit tree predicts the training mean exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _grow(X, y, order, boot, min_leaf, mtry, seed):
    """Grow one tree on the resample ``boot``.

    ``order[f]`` is the argsort of column f over all rows, computed once per
    forest; a node scans it with per-row multiplicities instead of sorting.
    """
    np.random.seed(seed)
    n, p = X.shape
    nb = boot.shape[0]
    max_nodes = 2 * (nb // min_leaf) + 3
    feat = np.full(max_nodes, -1, dtype=np.int64)
    thr = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    idx = boot.copy()
    cnt = np.zeros(n, dtype=np.int64)
    st_node = np.empty(max_nodes, dtype=np.int64)
    st_lo = np.empty(max_nodes, dtype=np.int64)
    st_hi = np.empty(max_nodes, dtype=np.int64)
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = nb
    top = 1
    count = 1
    perm = np.arange(p)
    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        size = hi - lo
        if size < 2 * min_leaf:
            continue
        total = 0.0
        for i in range(lo, hi):
            total += y[idx[i]]
            cnt[idx[i]] += 1
        best = total * total / size
        best_f = -1
        best_t = 0.0
        # partial Fisher-Yates draw of mtry features
        for a in range(mtry):
            b = a + np.random.randint(p - a)
            tmp = perm[a]
            perm[a] = perm[b]
            perm[b] = tmp
        for a in range(mtry):
            f = perm[a]
            of = order[f]
            ls = 0.0
            nl = 0
            prev = 0.0
            for k in range(n):
                r = of[k]
                m = cnt[r]
                if m == 0:
                    continue
                v = X[r, f]
                if nl >= min_leaf and v > prev:
                    nr = size - nl
                    if nr < min_leaf:
                        break
                    rs = total - ls
                    gain = ls * ls / nl + rs * rs / nr
                    if gain > best * (1.0 + 1e-12):
                        best = gain
                        best_f = f
                        best_t = prev + 0.5 * (v - prev)
                        if best_t >= v:
                            best_t = prev
                ls += m * y[r]
                nl += m
                prev = v
        for i in range(lo, hi):
            cnt[idx[i]] = 0
        if best_f < 0:
            continue
        # partition idx[lo:hi] in place
        i = lo
        j = hi - 1
        while i <= j:
            if X[idx[i], best_f] <= best_t:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        feat[node] = best_f
        thr[node] = best_t
        left[node] = count
        right[node] = count + 1
        st_node[top] = count
        st_lo[top] = lo
        st_hi[top] = i
        top += 1
        st_node[top] = count + 1
        st_lo[top] = i
        st_hi[top] = hi
        top += 1
        count += 2
    return feat[:count], thr[:count], left[:count], right[:count]


@njit(cache=True, nogil=True)
def _leaf_of(X, feat, thr, left, right, offset):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = offset
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = offset + left[node]
            else:
                node = offset + right[node]
        out[i] = node
    return out


@njit(cache=True, nogil=True)
def _predict(X, feat, thr, left, right, value, offsets):
    n_trees = offsets.shape[0]
    out = np.zeros(X.shape[0])
    for t in range(n_trees):
        leaves = _leaf_of(X, feat, thr, left, right, offsets[t])
        for i in range(X.shape[0]):
            out[i] += value[leaves[i]]
    return out / n_trees


@dataclass(frozen=True)
class ForestModel:
    feat: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray

    @property
    def n_trees(self) -> int:
        return self.offsets.shape[0]

    def predict(self, features) -> np.ndarray:
        X = np.ascontiguousarray(features, dtype=float)
        return _predict(X, self.feat, self.thr, self.left, self.right, self.value, self.offsets)


@njit(cache=True, nogil=True)
def _grow_forest(X, y, order, boots, min_leaf, mtry, seeds):
    n = X.shape[0]
    n_trees = boots.shape[0]
    cap = n_trees * (2 * (boots.shape[1] // min_leaf) + 3)
    feat = np.empty(cap, dtype=np.int64)
    thr = np.empty(cap)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.zeros(cap)
    offsets = np.empty(n_trees, dtype=np.int64)
    off = 0
    for t in range(n_trees):
        f, th, lf, rt = _grow(X, y, order, boots[t], min_leaf, mtry, seeds[t])
        m = f.shape[0]
        feat[off : off + m] = f
        thr[off : off + m] = th
        left[off : off + m] = lf
        right[off : off + m] = rt
        leaves = _leaf_of(X, f, th, lf, rt, 0)
        counts = np.zeros(m)
        for i in range(n):
            value[off + leaves[i]] += y[i]
            counts[leaves[i]] += 1.0
        for k in range(m):
            if counts[k] > 0:
                value[off + k] /= counts[k]
        offsets[t] = off
        off += m
    return feat[:off], thr[:off], left[:off], right[:off], value[:off], offsets


def fit_random_forest(features, targets, n_trees: int, min_leaf: int, seed: int,
                      feature_fraction: float = 1.0 / 3.0) -> ForestModel:
    X = np.ascontiguousarray(features, dtype=float)
    y = np.ascontiguousarray(targets, dtype=float)
    n, p = X.shape
    if n < min_leaf:
        raise ValueError(f"need at least min_leaf={min_leaf} rows, got {n}")
    mtry = max(1, min(p, math.ceil(feature_fraction * p)))
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    rng = np.random.default_rng(seed)
    boots = rng.integers(0, n, (n_trees, n))
    tree_seeds = rng.integers(0, 2**31 - 1, n_trees)
    return ForestModel(*_grow_forest(X, y, order, boots, min_leaf, mtry, tree_seeds))
