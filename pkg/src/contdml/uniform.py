"""Multiplier-bootstrap uniform confidence bands over a treatment grid."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from contdml.data import TreatmentGrid

_CHUNK = 256


@dataclass(frozen=True, eq=False)
class UniformBandResult:
    grid: Optional[TreatmentGrid]
    beta_hats: np.ndarray
    half_widths: np.ndarray
    quantile: float
    n_draws: int
    multiplier_kind: str
    sup_draws: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        return self.beta_hats - self.half_widths

    @property
    def upper(self) -> np.ndarray:
        return self.beta_hats + self.half_widths


def _multipliers(rng: np.random.Generator, size, kind: str) -> np.ndarray:
    if kind == "normal":
        return rng.standard_normal(size)
    if kind == "rademacher":
        return rng.integers(0, 2, size) * 2.0 - 1.0
    raise ValueError(f"unknown multiplier kind {kind!r}")


def bootstrap_processes(psi, h: float, d_t: int, n_draws: int, kind: str, seed: int) -> np.ndarray:
    """(n_draws, G) draws of sqrt(h^{d_t}/n) sum_i U_i psi_it.

    Draws come in fixed-size chunks, each from its own seeded stream, so the
    result depends only on ``seed`` and ``n_draws``.
    """
    psi = np.asarray(psi, dtype=float)
    n = psi.shape[0]
    scale = np.sqrt(h**d_t / n)
    n_chunks = -(-n_draws // _CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    out = np.empty((n_draws, psi.shape[1]))
    for c, ss in enumerate(streams):
        lo = c * _CHUNK
        m = min(_CHUNK, n_draws - lo)
        U = _multipliers(np.random.default_rng(ss), (m, n), kind)
        out[lo : lo + m] = scale * (U @ psi)
    return out


def multiplier_bootstrap(psi, h: float, d_t: int, alpha: float = 0.05, n_draws: int = 1000,
                         multiplier_kind: str = "normal", seed: int = 0, beta_hats=None,
                         grid: Optional[TreatmentGrid] = None) -> UniformBandResult:
    """Uniform band from the studentized sup of the multiplier process.

    ``psi`` is the (n, G) matrix of estimated influence values.  The (1 - alpha)
    quantile of max_t |Z_t| / sqrt(V_t) scales each pointwise SE into a
    uniform half-width.  Grid points with zero variance are left out of the
    sup and get half-width 0.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    if psi.ndim != 2 or psi.shape[1] < 1:
        raise ValueError("psi must be an (n, G) matrix with G >= 1")
    if n_draws < 100:
        raise ValueError("n_draws must be at least 100")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    n, G = psi.shape
    hd = h**d_t
    v_hat = hd * np.mean(psi * psi, axis=0)
    se = np.sqrt(v_hat / (n * hd))
    ok = v_hat > 0
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} grid points have zero variance and are excluded",
                      RuntimeWarning, stacklevel=2)
    draws = bootstrap_processes(psi[:, ok], h, d_t, n_draws, multiplier_kind, seed)
    if ok.any():
        sup = np.max(np.abs(draws) / np.sqrt(v_hat[ok]), axis=1)
        q = float(np.quantile(sup, 1.0 - alpha))
    else:
        sup = np.zeros(n_draws)
        q = 0.0
    half = np.where(ok, q * se, 0.0)
    beta = np.zeros(G) if beta_hats is None else np.asarray(beta_hats, dtype=float)
    return UniformBandResult(grid, beta, half, q, n_draws, multiplier_kind, sup)
