"""DML dose-response and partial-effect estimators, baselines, variance, bias and bandwidths."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from contdml.crossfit import FoldAssignment, FoldNuisances, fit_fold_nuisances
from contdml.data import Dataset, EstimationConfig, TreatmentGrid
from contdml.kernels import KernelSpec, product_kernel


@dataclass(frozen=True, eq=False)
class InfluenceRecord:
    """Per-observation pieces of the estimate at one t (arrays of length n)."""

    psi: np.ndarray
    kernel_weight: np.ndarray
    gamma_at_t: np.ndarray
    gps_at_t: np.ndarray
    correction: np.ndarray  # K_h(T_i - t)(Y_i - gamma) / f


@dataclass(frozen=True)
class EstimateResult:
    t_eval: tuple
    beta_hat: float
    se: float
    bias_hat: float  # estimate of the leading bias h^2 B_t
    ci_lower: float
    ci_upper: float
    n_effective: float
    floored_count: int
    v_hat: float
    b_hat: float  # B_t estimate, bias_hat / h^2


@dataclass(frozen=True)
class PartialEffectResult:
    t_eval: tuple
    theta_hat: float
    eta: float
    se: float
    variance_regime: str
    ci_lower: float
    ci_upper: float
    beta_plus: float
    beta_minus: float


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


def confidence_interval(beta_hat: float, se: float, alpha: float) -> tuple[float, float]:
    if se < 0:
        raise ValueError("se must be nonnegative")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    half = normal_quantile(1.0 - alpha / 2.0) * se
    return beta_hat - half, beta_hat + half


def out_of_fold_values(data: Dataset, nuisances: FoldNuisances, folds: FoldAssignment, k: int):
    """gamma_l(t_k, X_i) and the unfloored GPS f_l(t_k | X_i), each from i's own fold."""
    t = nuisances.grid.points[k]
    gamma = np.empty(data.n)
    gps = np.empty(data.n)
    for f in range(folds.n_folds):
        idx = folds.members(f)
        if idx.size == 0:
            continue
        x = data.x_mat[idx]
        gamma[idx] = nuisances.gamma[f].predict_at(t, x)
        gps[idx] = nuisances.gps[f][k].raw(x)
    return gamma, gps


def dml_from_values(y, kernel_weight, gamma, gps, h: float, d_t: int, alpha: float,
                    t_eval=(0.0,), floored_count: int = 0):
    """Doubly robust estimate from already evaluated nuisance values.

    ``gps`` must already be floored.  Returns ``(EstimateResult, InfluenceRecord)``.
    """
    y = np.asarray(y, dtype=float)
    kw = np.asarray(kernel_weight, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    gps = np.asarray(gps, dtype=float)
    n = y.shape[0]
    if not (kw > 0).any():
        warnings.warn(f"no local data at t = {tuple(t_eval)}: all kernel weights are zero; "
                      "falling back to the regression estimator", RuntimeWarning, stacklevel=3)
    correction = kw * (y - gamma) / gps
    beta = float(np.mean(gamma + correction))
    psi = correction + gamma - beta
    hd = h**d_t
    v_hat = float(hd * np.mean(psi * psi))
    se = float(np.sqrt(v_hat / (n * hd)))
    bias = float(np.mean(correction))
    lo, hi = confidence_interval(beta, se, alpha)
    res = EstimateResult(
        t_eval=tuple(float(v) for v in np.ravel(t_eval)),
        beta_hat=beta,
        se=se,
        bias_hat=bias,
        ci_lower=lo,
        ci_upper=hi,
        n_effective=float((kw > 0).sum()),
        floored_count=int(floored_count),
        v_hat=v_hat,
        b_hat=bias / (h * h),
    )
    return res, InfluenceRecord(psi, kw, gamma, gps, correction)


def _pieces(data, nuisances, folds, t_eval, kernel, floor):
    k = nuisances.grid_index(t_eval)
    t = nuisances.grid.points[k]
    gamma, raw = out_of_fold_values(data, nuisances, folds, k)
    kw = product_kernel(kernel, data.t_mat, t)
    return t, kw, gamma, np.maximum(raw, floor), int((raw < floor).sum())


def dml_beta(data: Dataset, nuisances: FoldNuisances, folds: FoldAssignment, t_eval,
             kernel: KernelSpec, config: EstimationConfig):
    """beta_t = n^{-1} sum_i {gamma_l(t,X_i) + K_h(T_i - t)(Y_i - gamma_l(t,X_i)) / f_l(t|X_i)}."""
    t, kw, gamma, gps, floored = _pieces(data, nuisances, folds, t_eval, kernel, config.density_floor)
    return dml_from_values(data.y, kw, gamma, gps, kernel.bandwidth, data.d_t, config.alpha, t, floored)


def bias_estimate(record: InfluenceRecord) -> float:
    """n^{-1} sum_i K_h(T_i - t)(Y_i - gamma_l(t,X_i)) / f_l(t|X_i), the sample analogue of h^2 B_t."""
    return float(np.mean(record.correction))


def reg_estimator(data: Dataset, nuisances: FoldNuisances, folds: FoldAssignment, t_eval) -> float:
    """Regression (imputation) estimator n^{-1} sum_i gamma_l(t, X_i)."""
    k = nuisances.grid_index(t_eval)
    gamma, _ = out_of_fold_values(data, nuisances, folds, k)
    return float(gamma.mean())


def ipw_estimator(data: Dataset, nuisances: FoldNuisances, folds: FoldAssignment, t_eval,
                  kernel: KernelSpec, floor: float = 0.0) -> float:
    """Inverse probability weighting estimator n^{-1} sum_i K_h(T_i - t) Y_i / f_l(t | X_i)."""
    _, kw, _, gps, _ = _pieces(data, nuisances, folds, t_eval, kernel, floor)
    if not (kw > 0).any():
        warnings.warn("all kernel weights are zero; IPW estimate is 0", RuntimeWarning, stacklevel=2)
    return float(np.mean(kw * data.y / gps))


def estimate_curve(data: Dataset, grid: TreatmentGrid, config: EstimationConfig,
                   folds: Optional[FoldAssignment] = None,
                   nuisances: Optional[FoldNuisances] = None, threads: int = 1):
    """Cross-fit once and estimate beta_t at every grid point.

    Returns ``(results, psi)`` with ``psi`` the (n, G) matrix of estimated influence values.
    """
    from contdml.crossfit import make_folds

    config.check_against(data.n)
    if folds is None:
        folds = make_folds(data.n, config.n_folds, config.seed)
    if nuisances is None:
        nuisances = fit_fold_nuisances(data, folds, grid, config, threads)
    kernel = KernelSpec(config.kernel, config.bandwidth_h)
    results, psis = [], []
    for t in grid.points:
        res, rec = dml_beta(data, nuisances, folds, t, kernel, config)
        results.append(res)
        psis.append(rec.psi)
    return results, np.column_stack(psis)


def dml_theta(data: Dataset, folds: FoldAssignment, t_eval, eta: float, kernel: KernelSpec,
              config: EstimationConfig, nuisances: Optional[FoldNuisances] = None,
              threads: int = 1):
    """theta_t = (beta_{t+} - beta_{t-}) / eta with t+- = t +- (eta/2) e_1.

    The standard error is the plug-in from the per-observation contrast
    (psi_{t+,i} - psi_{t-,i}) / eta.  Returns ``(PartialEffectResult, contrast)``
    where ``contrast`` holds those per-observation values.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    t = np.asarray(t_eval, dtype=float).reshape(-1)
    step = np.zeros_like(t)
    step[0] = eta / 2.0
    t_minus, t_plus = t - step, t + step
    if nuisances is None:
        grid = TreatmentGrid(np.vstack([t_minus, t_plus]))
        nuisances = fit_fold_nuisances(data, folds, grid, config, threads)
    r_plus, rec_plus = dml_beta(data, nuisances, folds, t_plus, kernel, config)
    r_minus, rec_minus = dml_beta(data, nuisances, folds, t_minus, kernel, config)
    theta = (r_plus.beta_hat - r_minus.beta_hat) / eta
    contrast = (rec_plus.psi - rec_minus.psi) / eta
    h = kernel.bandwidth
    hd = h**data.d_t
    v_theta = hd * np.mean((rec_plus.psi - rec_minus.psi) ** 2)
    se = float(np.sqrt(v_theta / (data.n * hd * eta * eta)))
    lo, hi = confidence_interval(theta, se, config.alpha)
    regime = "rho_finite" if eta / h >= 0.2 else "rho_zero"
    res = PartialEffectResult(tuple(float(v) for v in t), float(theta), float(eta), se, regime,
                              lo, hi, r_plus.beta_hat, r_minus.beta_hat)
    return res, contrast


def optimal_bandwidth_pointwise(v_hat: float, b_hat: float, d_t: int, n: int) -> float:
    """AMSE-optimal h = (d_t V / (4 B^2))^{1/(d_t+4)} n^{-1/(d_t+4)}."""
    if b_hat == 0:
        raise ValueError("bias constant is zero; the AMSE-optimal bandwidth is undefined, "
                         "use a rule-of-thumb bandwidth such as sd(T) n^{-1/5}")
    r = 1.0 / (d_t + 4)
    return float((d_t * v_hat / (4.0 * b_hat * b_hat)) ** r * n ** (-r))


def optimal_bandwidth_integrated(v_hats: Sequence[float], b_hats: Sequence[float], d_t: int, n: int) -> float:
    """Integrated-AMSE bandwidth under a uniform weight over the grid."""
    v = np.asarray(v_hats, dtype=float)
    b = np.asarray(b_hats, dtype=float)
    if v.size == 0 or v.size != b.size:
        raise ValueError("need matching, nonempty V and B sequences")
    b_w = float(np.mean(b * b))
    if b_w == 0:
        raise ValueError("all bias constants are zero; the integrated AMSE bandwidth is undefined")
    r = 1.0 / (d_t + 4)
    return float((d_t * float(v.mean()) / (4.0 * b_w)) ** r * n ** (-r))


def rule_of_thumb_bandwidth(t_mat, c: float = 1.0) -> float:
    """h = c * sd(T_1) * n^{-1/5}, population sd of the first treatment column."""
    t_mat = np.asarray(t_mat, dtype=float).reshape(len(t_mat), -1)
    return float(c * t_mat[:, 0].std() * t_mat.shape[0] ** -0.2)
