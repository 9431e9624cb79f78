import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contdml.crossfit import child_seed, fit_fold_nuisances, make_folds
from contdml.data import EstimationConfig, TreatmentGrid, dataset_from_columns
from contdml.estimators import estimate_curve
from contdml.learners import LearnerSpec
from contdml.simulation import DgpSpec, draw_dgp


def test_fold_sizes_and_no_split():
    assert sorted(make_folds(5, 2, 0).sizes()) == [2, 3]
    f = make_folds(4, 1, 0)
    assert np.all(f.fold_of == 0)
    np.testing.assert_array_equal(f.training(0), np.arange(4))


def test_fold_errors():
    with pytest.raises(ValueError):
        make_folds(3, 4, 0)
    with pytest.raises(ValueError):
        make_folds(3, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(1, 20), st.integers(0, 2**63 - 1))
def test_fold_invariants(n, L, seed):
    L = min(L, n)
    f = make_folds(n, L, seed)
    sizes = f.sizes()
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1
    np.testing.assert_array_equal(f.fold_of, make_folds(n, L, seed).fold_of)
    members = np.concatenate([f.members(k) for k in range(L)])
    assert sorted(members.tolist()) == list(range(n))


def test_child_seed_distinct():
    seeds = {child_seed(0, a, b) for a in range(10) for b in range(10)}
    assert len(seeds) == 100
    assert all(0 <= s < 2**63 for s in seeds)
    assert child_seed(5, 1) == child_seed(5, 1)


def test_leave_one_out_trains_on_two_points():
    d = dataset_from_columns([1.0, 2.0, 3.0], [[0.0], [0.5], [1.0]], [[1.0], [2.0], [0.0]])
    folds = make_folds(3, 3, 0)
    cfg = EstimationConfig(bandwidth_h=1.0, n_folds=3, learner=LearnerSpec("kernel_regression"))
    nu = fit_fold_nuisances(d, folds, TreatmentGrid.from_values([0.5]), cfg)
    for f in range(3):
        assert nu.training_rows[f].size == 2


def test_exclusivity_audit(rng):
    n = 60
    d = dataset_from_columns(rng.normal(size=n), rng.normal(size=(n, 1)), rng.normal(size=(n, 2)))
    folds = make_folds(n, 4, 3)
    cfg = EstimationConfig(bandwidth_h=1.0, n_folds=4, learner=LearnerSpec("kernel_regression"))
    nu = fit_fold_nuisances(d, folds, TreatmentGrid.from_values([0.0, 0.5]), cfg)
    for i in range(n):
        assert i not in set(nu.training_rows[folds.fold_of[i]].tolist())


def test_threads_do_not_change_nuisances(rng):
    n = 80
    d = dataset_from_columns(rng.normal(size=n), rng.normal(size=(n, 1)), rng.normal(size=(n, 3)))
    cfg = EstimationConfig(bandwidth_h=0.8, n_folds=3, learner=LearnerSpec("random_forest", n_trees=10, min_leaf=5))
    grid = TreatmentGrid.from_values([-0.5, 0.0, 0.5])
    a, psi_a = estimate_curve(d, grid, cfg, threads=1)
    b, psi_b = estimate_curve(d, grid, cfg, threads=3)
    assert a == b
    np.testing.assert_array_equal(psi_a, psi_b)


@pytest.mark.slow
def test_fold_seed_spread_below_se():
    spec = DgpSpec(d_x=10)
    d = draw_dgp(spec, 1000, 2024)
    grid = TreatmentGrid.from_values([0.0])
    h = d.t_mat[:, 0].std() * d.n ** -0.2
    betas, ses = [], []
    for s in range(100):
        cfg = EstimationConfig(bandwidth_h=h, n_folds=5, seed=s, learner=LearnerSpec("kernel_regression"))
        (res,), _ = estimate_curve(d, grid, cfg)
        betas.append(res.beta_hat)
        ses.append(res.se)
    assert np.std(betas) < np.mean(ses)
