"""Simulation design with a confounded continuous treatment, its closed-form
oracles, and a Monte Carlo runner producing bias / RMSE / coverage tables.

X ~ N(0, Sigma) with unit variances and 0.5 on the first off-diagonals,
T = Phi(3 X'theta) + 0.75 nu,  Y = 1.2 T + 1.2 X'theta + T^2 + T X_1 + eps,
theta_j = 1/j^2.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from contdml.crossfit import child_seed, fit_fold_nuisances, make_folds
from contdml.data import Dataset, EstimationConfig, TreatmentGrid, dataset_from_columns
from contdml.estimators import dml_beta, rule_of_thumb_bandwidth
from contdml.kernels import KernelSpec, convolution_kernel, kernel_constants
from contdml.learners import LearnerSpec

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DgpSpec:
    d_x: int = 100
    off_diagonal: float = 0.5
    index_scale: float = 3.0
    noise_scale: float = 0.75
    # outcome coefficients on T, X'theta, T^2, T X_1
    b_t: float = 1.2
    b_index: float = 1.2
    b_tt: float = 1.0
    b_tx1: float = 1.0

    @property
    def theta_coeffs(self) -> np.ndarray:
        return 1.0 / np.arange(1, self.d_x + 1) ** 2

    @property
    def sigma(self) -> np.ndarray:
        s = np.eye(self.d_x)
        i = np.arange(self.d_x - 1)
        s[i, i + 1] = s[i + 1, i] = self.off_diagonal
        return s

    def cholesky_bands(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and subdiagonal of the lower bidiagonal Cholesky factor of Sigma."""
        diag = np.empty(self.d_x)
        sub = np.zeros(self.d_x)
        diag[0] = 1.0
        for i in range(1, self.d_x):
            sub[i] = self.off_diagonal / diag[i - 1]
            rem = 1.0 - sub[i] ** 2
            if rem <= 0:
                raise ValueError("covariance is not positive definite")
            diag[i] = math.sqrt(rem)
        return diag, sub


def draw_covariates(spec: DgpSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    diag, sub = spec.cholesky_bands()
    z = rng.standard_normal((n, spec.d_x))
    x = z * diag
    x[:, 1:] += z[:, :-1] * sub[1:]
    return x


def draw_dgp(spec: DgpSpec, n: int, seed: int) -> Dataset:
    if n < 2:
        raise ValueError("a Dataset needs at least 2 observations")
    rng = np.random.default_rng(seed)
    x = draw_covariates(spec, n, rng)
    nu = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    index = x @ spec.theta_coeffs
    t = ndtr(spec.index_scale * index) + spec.noise_scale * nu
    y = spec.b_t * t + spec.b_index * index + spec.b_tt * t**2 + spec.b_tx1 * t * x[:, 0] + eps
    return dataset_from_columns(y, t[:, None], x)


def oracle_beta(t, spec: DgpSpec = DgpSpec()):
    """beta_t = E[Y(t)] = 1.2 t + t^2, since X'theta and X_1 have mean zero."""
    t = np.asarray(t, dtype=float)
    return spec.b_t * t + spec.b_tt * t**2


def oracle_theta(t, spec: DgpSpec = DgpSpec()):
    t = np.asarray(t, dtype=float)
    return spec.b_t + 2.0 * spec.b_tt * t


@dataclass(frozen=True)
class OracleNuisances:
    spec: DgpSpec

    def gamma(self, t, x_mat):
        """gamma(t, x) = 1.2 t + 1.2 x'theta + t^2 + t x_1."""
        s = self.spec
        t = float(np.ravel(t)[0])
        x_mat = np.atleast_2d(x_mat)
        return s.b_t * t + s.b_index * (x_mat @ s.theta_coeffs) + s.b_tt * t * t + s.b_tx1 * t * x_mat[:, 0]

    def mean_t(self, x_mat):
        return ndtr(self.spec.index_scale * (np.atleast_2d(x_mat) @ self.spec.theta_coeffs))

    def gps(self, t, x_mat):
        """f(t | x) = phi((t - Phi(3 x'theta)) / 0.75) / 0.75."""
        sd = self.spec.noise_scale
        z = (float(np.ravel(t)[0]) - self.mean_t(x_mat)) / sd
        return np.exp(-0.5 * z * z) / (_SQRT_2PI * sd)


def oracle_nuisances(spec: DgpSpec = DgpSpec()):
    """Exact ``(gamma(t, X), gps(t, X))`` for the design."""
    o = OracleNuisances(spec)
    return o.gamma, o.gps


@dataclass(frozen=True)
class OracleConstants:
    b_t: float
    v_t: float
    sd_t: float
    mean_inv_density: float


def oracle_bias_variance_constants(t: float, spec: DgpSpec = DgpSpec(), kernel: str = "epanechnikov",
                                  n_draws: int = 1_000_000, seed: int = 0,
                                  chunk: int = 100_000) -> OracleConstants:
    """Leading bias B_t and variance V_t by Monte Carlo integration over X.

    B_t = E[0.5 d2gamma/dt2 + dgamma/dt * (df/dt)/f] * int u^2 k,
    V_t = E[var(Y|T,X) / f(t|X)] * int k^2 with var(Y|T,X) = 1.
    Also returns the population sd of T from the same draws.
    """
    kc = kernel_constants(kernel)
    rng = np.random.default_rng(seed)
    o = OracleNuisances(spec)
    sd = spec.noise_scale
    acc_b = acc_v = acc_t = acc_t2 = 0.0
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        x = draw_covariates(spec, m, rng)
        mu = o.mean_t(x)
        f = o.gps(t, x)
        dgamma = spec.b_t + 2.0 * spec.b_tt * t + spec.b_tx1 * x[:, 0]
        dlogf = -(t - mu) / sd**2
        acc_b += np.sum(spec.b_tt + dgamma * dlogf)
        acc_v += np.sum(1.0 / f)
        tt = mu + sd * rng.standard_normal(m)
        acc_t += tt.sum()
        acc_t2 += (tt * tt).sum()
        done += m
    mean_inv = acc_v / n_draws
    var_t = acc_t2 / n_draws - (acc_t / n_draws) ** 2
    return OracleConstants(
        b_t=float(acc_b / n_draws * kc.second_moment),
        v_t=float(mean_inv * kc.roughness),
        sd_t=float(math.sqrt(var_t)),
        mean_inv_density=float(mean_inv),
    )


def amse_constant(t: float = 0.0, spec: DgpSpec = DgpSpec(), kernel: str = "epanechnikov",
                  n_draws: int = 1_000_000, seed: int = 0) -> float:
    """c* with h*_t = c* sd(T) n^{-1/5}, i.e. (V_t / (4 B_t^2))^{1/5} / sd(T) for d_t = 1."""
    oc = oracle_bias_variance_constants(t, spec, kernel, n_draws, seed)
    return (oc.v_t / (4.0 * oc.b_t**2)) ** 0.2 / oc.sd_t


def oracle_partial_effect_variance(t: float, rho: float, spec: DgpSpec = DgpSpec(),
                                   kernel: str = "epanechnikov", n_draws: int = 1_000_000,
                                   seed: int = 0) -> float:
    """V^theta_t: E[1/f] int k'^2 when rho = 0, else 2 E[1/f](int k^2 - kbar(rho))."""
    oc = oracle_bias_variance_constants(t, spec, kernel, n_draws, seed)
    kc = kernel_constants(kernel)
    if rho == 0:
        return oc.mean_inv_density * kc.deriv_roughness
    kbar = 0.0 if math.isinf(rho) else float(convolution_kernel(kernel, rho))
    return 2.0 * oc.mean_inv_density * (kc.roughness - kbar)


# --- Monte Carlo -----------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    n: int
    n_folds: int
    c: float
    learner: LearnerSpec
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or self.learner.kind


@dataclass(frozen=True, eq=False)
class SimulationReport:
    learner: str
    n: int
    n_folds: int
    c: float
    bias: float
    rmse: float
    coverage: float
    n_reps: int
    mean_se: float
    wall_time: float
    n_failed: int = 0
    failed: bool = False
    estimates: np.ndarray = field(default=None, repr=False)
    ses: np.ndarray = field(default=None, repr=False)


def replicate(cell: Cell, rep: int, base_seed: int, spec: DgpSpec, t_eval: float = 0.0,
              alpha: float = 0.05, density_floor: float = 1e-3) -> tuple[float, float]:
    """One draw -> estimate at ``t_eval``.  Returns ``(beta_hat, se)``."""
    data = draw_dgp(spec, cell.n, child_seed(base_seed, cell.n, rep))
    h = rule_of_thumb_bandwidth(data.t_mat, cell.c)
    config = EstimationConfig(bandwidth_h=h, n_folds=cell.n_folds, alpha=alpha,
                              density_floor=density_floor, seed=child_seed(base_seed, rep, 1),
                              learner=cell.learner)
    folds = make_folds(data.n, cell.n_folds, config.seed)
    grid = TreatmentGrid.from_values([t_eval])
    nuis = fit_fold_nuisances(data, folds, grid, config)
    res, _ = dml_beta(data, nuis, folds, grid.points[0], KernelSpec(config.kernel, h), config)
    return res.beta_hat, res.se


def summarize(cell: Cell, estimates, ses, truth: float, alpha: float, wall_time: float) -> SimulationReport:
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(ses, dtype=float)
    ok = np.isfinite(est) & np.isfinite(se)
    n_failed = int((~ok).sum())
    est, se = est[ok], se[ok]
    z = float(ndtri(1 - alpha / 2))
    err = est - truth
    if est.size:
        bias = float(err.mean())
        rmse = float(np.sqrt(np.mean(err * err)))
        coverage = float(np.mean(np.abs(err) <= z * se))
        mean_se = float(se.mean())
    else:
        bias = rmse = coverage = mean_se = float("nan")
    failed = n_failed >= 0.01 * len(estimates) and n_failed > 0
    return SimulationReport(cell.label, cell.n, cell.n_folds, cell.c, bias, rmse, coverage,
                            int(est.size), mean_se, wall_time, n_failed, failed, est, se)


def run_cell(cell: Cell, n_reps: int, base_seed: int = 0, spec: DgpSpec = DgpSpec(),
             threads: int = 1, t_eval: float = 0.0, alpha: float = 0.05,
             density_floor: float = 1e-3) -> SimulationReport:
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    start = time.perf_counter()

    def job(rep):
        try:
            return replicate(cell, rep, base_seed, spec, t_eval, alpha, density_floor)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError):
            return float("nan"), float("nan")

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(job, range(n_reps)))
    else:
        out = [job(r) for r in range(n_reps)]
    est, ses = (np.array(v) for v in zip(*out))
    return summarize(cell, est, ses, float(oracle_beta(t_eval, spec)), alpha, time.perf_counter() - start)


def run_monte_carlo(cells: Sequence[Cell], n_reps: int, base_seed: int = 0,
                    spec: DgpSpec = DgpSpec(), threads: int = 1, **kwargs) -> list[SimulationReport]:
    return [run_cell(cell, n_reps, base_seed, spec, threads, **kwargs) for cell in cells]


def desk_cells(learners: Optional[dict] = None) -> list[Cell]:
    """{500, 1000} x {L=1, 5} x {c = 0.5, 1.0, 1.5} for each learner."""
    if learners is None:
        learners = {
            "lasso": LearnerSpec("lasso"),
            "random_forest": LearnerSpec("random_forest", n_trees=200),
            "kernel_regression": LearnerSpec("kernel_regression"),
        }
    return [
        Cell(n, L, c, spec, name)
        for name, spec in learners.items()
        for n in (500, 1000)
        for L in (1, 5)
        for c in (0.5, 1.0, 1.5)
    ]
