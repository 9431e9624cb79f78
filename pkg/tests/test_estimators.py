import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contdml.crossfit import FoldNuisances, make_folds
from contdml.data import EstimationConfig, TreatmentGrid, dataset_from_columns
from contdml.estimators import (
    bias_estimate,
    confidence_interval,
    dml_beta,
    dml_from_values,
    dml_theta,
    estimate_curve,
    ipw_estimator,
    normal_quantile,
    optimal_bandwidth_integrated,
    optimal_bandwidth_pointwise,
    reg_estimator,
)
from contdml.kernels import KernelSpec, product_kernel
from contdml.learners import LearnerSpec

EPAN1 = KernelSpec("epanechnikov", 1.0)


def toy():
    d = dataset_from_columns([1.0, 2.0], [[0.0], [1.0]], [[0.0], [1.0]])
    folds = make_folds(2, 1, 0)
    grid = TreatmentGrid.from_values([0.0])
    nu = FoldNuisances.from_functions(folds, grid, lambda t, x: 0.5 + x[:, 0], lambda t, x: np.ones(len(x)))
    return d, folds, nu


def test_toy_hand_evaluation():
    d, folds, nu = toy()
    res, rec = dml_beta(d, nu, folds, [0.0], EPAN1, EstimationConfig(bandwidth_h=1.0, n_folds=1))
    assert res.beta_hat == pytest.approx(1.1875, abs=1e-15)
    assert bias_estimate(rec) == pytest.approx(0.1875, abs=1e-15)
    assert res.bias_hat == pytest.approx(0.1875, abs=1e-15)
    assert res.n_effective == 1.0
    assert reg_estimator(d, nu, folds, [0.0]) == 1.0
    assert ipw_estimator(d, nu, folds, [0.0], EPAN1) == pytest.approx(0.375)


def test_ipw_single_observation():
    d = dataset_from_columns([2.0, 7.0], [[0.0], [5.0]], [[0.0], [0.0]])
    folds = make_folds(2, 1, 0)
    nu = FoldNuisances.from_functions(folds, TreatmentGrid.from_values([0.0]),
                                      lambda t, x: np.zeros(len(x)), lambda t, x: np.ones(len(x)))
    assert ipw_estimator(d, nu, folds, [0.0], EPAN1) == pytest.approx(0.75 * 2.0 / 2)


@pytest.mark.parametrize("kind", ["lasso", "kernel_regression", "random_forest", "constant"])
def test_constant_outcome(kind, rng):
    n = 60
    d = dataset_from_columns(np.full(n, 3.25), rng.normal(size=(n, 1)), rng.normal(size=(n, 2)))
    cfg = EstimationConfig(bandwidth_h=0.7, n_folds=3, learner=LearnerSpec(kind, n_trees=5, min_leaf=5))
    results, psi = estimate_curve(d, TreatmentGrid.from_values([-0.5, 0.0]), cfg)
    for r in results:
        assert r.beta_hat == pytest.approx(3.25, abs=1e-10)
        assert abs(r.bias_hat) < 1e-10


def random_nuisances(rng, n, L, grid):
    a, b = rng.normal(size=2)
    gamma = lambda t, x: a + b * t[0] + x[:, 0]
    gps = lambda t, x: 0.2 + np.abs(np.sin(x[:, 1] + t[0]))
    folds = make_folds(n, L, int(rng.integers(1 << 30)))
    return folds, FoldNuisances.from_functions(folds, grid, gamma, gps)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 60), st.sampled_from([1, 2, 5]),
       st.sampled_from(["epanechnikov", "gaussian"]))
def test_identities(seed, n, L, family):
    rng = np.random.default_rng(seed)
    d = dataset_from_columns(rng.normal(size=n), rng.normal(size=(n, 1)), rng.normal(size=(n, 2)))
    grid = TreatmentGrid.from_values([0.1])
    folds, nu = random_nuisances(rng, n, L, grid)
    kernel = KernelSpec(family, 0.6)
    cfg = EstimationConfig(bandwidth_h=0.6, n_folds=L, density_floor=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res, rec = dml_beta(d, nu, folds, [0.1], kernel, cfg)
        reg = reg_estimator(d, nu, folds, [0.1])
        ipw = ipw_estimator(d, nu, folds, [0.1], kernel)
    cross = np.mean(rec.kernel_weight * rec.gamma_at_t / rec.gps_at_t)
    assert res.beta_hat == pytest.approx(reg + ipw - cross, abs=1e-12)
    assert abs(rec.psi.mean()) <= 1e-12 * max(1.0, np.abs(rec.psi).max())
    assert res.se**2 * n * 0.6 == pytest.approx(res.v_hat, rel=1e-12)
    assert res.ci_lower <= res.beta_hat <= res.ci_upper
    assert res.se >= 0 and res.n_effective <= n


def test_one_fold_matches_full_sample_estimator(rng):
    n = 40
    d = dataset_from_columns(rng.normal(size=n), rng.normal(size=(n, 1)), rng.normal(size=(n, 2)))
    cfg = EstimationConfig(bandwidth_h=0.8, n_folds=1, learner=LearnerSpec("kernel_regression"))
    (res,), _ = estimate_curve(d, TreatmentGrid.from_values([0.0]), cfg)
    # full-sample nuisances fitted by hand
    from contdml.gps import fit_gps
    from contdml.learners import fit, make_features
    g = fit(cfg.learner, make_features("kernel_regression", d.t_mat, d.x_mat), d.y, 0)
    gamma = g.predict(make_features("kernel_regression", np.zeros((n, 1)), d.x_mat))
    f = fit_gps(cfg.learner, d, [0.0], 0.8, 1e-3, 0).evaluate(d.x_mat)
    kw = product_kernel(KernelSpec("epanechnikov", 0.8), d.t_mat, [0.0])
    direct = np.mean(gamma + kw * (d.y - gamma) / f)
    assert res.beta_hat == direct


def test_no_local_data_falls_back_to_regression():
    d = dataset_from_columns([1.0, 2.0, 3.0], [[0.0], [0.1], [0.2]], [[1.0], [2.0], [3.0]])
    folds = make_folds(3, 1, 0)
    nu = FoldNuisances.from_functions(folds, TreatmentGrid.from_values([9.0]),
                                      lambda t, x: x[:, 0], lambda t, x: np.ones(len(x)))
    with pytest.warns(RuntimeWarning, match="no local data"):
        res, _ = dml_beta(d, nu, folds, [9.0], EPAN1, EstimationConfig(bandwidth_h=1.0, n_folds=1))
    assert res.beta_hat == 2.0 and res.n_effective == 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_linear_curve_gives_exact_slope(rng):
    # treatments sit outside every kernel window, so no residual enters
    n = 50
    t = rng.uniform(3, 4, size=(n, 1))
    x = rng.normal(size=(n, 1))
    d = dataset_from_columns(rng.normal(size=n), t, x)
    folds = make_folds(n, 2, 1)
    grid = TreatmentGrid.from_values([-0.1, 0.1])
    nu = FoldNuisances.from_functions(folds, grid, lambda tt, xx: 0.4 + 1.7 * tt[0] + 0 * xx[:, 0],
                                      lambda tt, xx: np.ones(len(xx)))
    cfg = EstimationConfig(bandwidth_h=0.5, n_folds=2)
    res, contrast = dml_theta(d, folds, [0.0], 0.2, KernelSpec("epanechnikov", 0.5), cfg, nuisances=nu)
    assert res.theta_hat == pytest.approx(1.7, abs=1e-12)
    assert res.theta_hat == (res.beta_plus - res.beta_minus) / 0.2
    assert res.variance_regime == "rho_finite"
    res2, _ = dml_theta(d, folds, [0.0], 0.2, KernelSpec("epanechnikov", 5.0), cfg, nuisances=nu)
    assert res2.variance_regime == "rho_zero"
    with pytest.raises(ValueError):
        dml_theta(d, folds, [0.0], 0.0, EPAN1, cfg, nuisances=nu)


def test_theta_variance_doubles_for_far_apart_points(rng):
    # disjoint kernel windows: the contrast variance is the sum of the two variances
    n = 20000
    t = rng.uniform(-3, 3, size=(n, 1))
    x = rng.normal(size=(n, 1))
    d = dataset_from_columns(rng.normal(size=n), t, x)
    folds = make_folds(n, 1, 0)
    h, eta = 0.2, 2.0
    grid = TreatmentGrid.from_values([-1.0, 1.0])
    nu = FoldNuisances.from_functions(folds, grid, lambda tt, xx: np.zeros(len(xx)),
                                      lambda tt, xx: np.full(len(xx), 1 / 6))
    cfg = EstimationConfig(bandwidth_h=h, n_folds=1)
    kernel = KernelSpec("epanechnikov", h)
    res, _ = dml_theta(d, folds, [0.0], eta, kernel, cfg, nuisances=nu)
    v_plus = dml_beta(d, nu, folds, [1.0], kernel, cfg)[0].v_hat
    v_minus = dml_beta(d, nu, folds, [-1.0], kernel, cfg)[0].v_hat
    v_theta = res.se**2 * n * h * eta**2
    assert v_theta == pytest.approx(v_plus + v_minus, rel=0.10)
    assert v_theta == pytest.approx(2 * v_plus, rel=0.10)


def test_confidence_interval_quantiles():
    lo, hi = confidence_interval(1.0, 1.0, 0.05)
    assert (hi - lo) / 2 == pytest.approx(1.959964, abs=1e-6)
    assert confidence_interval(2.0, 0.0, 0.05) == (2.0, 2.0)
    mpmath.mp.dps = 30
    ref = float(mpmath.sqrt(2) * mpmath.erfinv(1 - mpmath.mpf("0.32")))
    assert normal_quantile(1 - 0.16) == pytest.approx(ref, abs=1e-8)
    assert ref == pytest.approx(0.994458, abs=1e-6)


@pytest.mark.parametrize("p", [1e-6, 0.01, 0.3, 0.5, 0.9, 0.975])
def test_normal_quantile_high_precision(p):
    mpmath.mp.dps = 30
    ref = float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))
    assert normal_quantile(p) == pytest.approx(ref, abs=1e-8)


def test_optimal_bandwidth_examples():
    assert optimal_bandwidth_pointwise(1.0, 1.0, 1, 1) == pytest.approx(0.757858283, abs=1e-9)
    r = optimal_bandwidth_pointwise(2.0, 0.5, 1, 32 * 7) / optimal_bandwidth_pointwise(2.0, 0.5, 1, 7)
    assert r == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError, match="rule-of-thumb"):
        optimal_bandwidth_pointwise(1.0, 0.0, 1, 10)
    assert optimal_bandwidth_integrated([3.0], [0.7], 1, 50) == optimal_bandwidth_pointwise(3.0, 0.7, 1, 50)
    assert optimal_bandwidth_integrated([1, 1, 1], [1, 1, 1], 1, 1) == pytest.approx(0.757858283, abs=1e-9)
    with pytest.raises(ValueError):
        optimal_bandwidth_integrated([1.0, 1.0], [0.0, 0.0], 1, 10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 5), st.integers(1, 2), st.integers(10, 10**6))
def test_optimal_bandwidth_grid_search(v, b, d_t, n):
    h_star = optimal_bandwidth_pointwise(v, b, d_t, n)
    grid = np.logspace(np.log10(h_star) - 2, np.log10(h_star) + 2, 1000)
    amse = grid**4 * b**2 + v / (n * grid**d_t)
    i = int(np.argmin(amse))
    step = np.log10(grid[1] / grid[0])
    assert abs(np.log10(grid[i] / h_star)) <= step


def test_dml_from_values_matches_formula(rng):
    n = 30
    y, kw, g = rng.normal(size=n), rng.uniform(0, 1, n), rng.normal(size=n)
    f = rng.uniform(0.5, 1, n)
    res, rec = dml_from_values(y, kw, g, f, 0.3, 1, 0.1)
    assert res.beta_hat == pytest.approx(np.mean(g + kw * (y - g) / f), abs=1e-14)
    assert res.b_hat == pytest.approx(res.bias_hat / 0.09, rel=1e-14)
