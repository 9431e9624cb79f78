"""Double debiased machine learning for continuous treatments."""
from contdml.crossfit import FoldAssignment, FoldNuisances, fit_fold_nuisances, make_folds
from contdml.data import (
    Dataset,
    EstimationConfig,
    TreatmentGrid,
    dataset_from_columns,
)
from contdml.estimators import (
    EstimateResult,
    PartialEffectResult,
    dml_beta,
    dml_theta,
    estimate_curve,
    optimal_bandwidth_integrated,
    optimal_bandwidth_pointwise,
    rule_of_thumb_bandwidth,
)
from contdml.kernels import KernelSpec
from contdml.learners import LearnerSpec
from contdml.uniform import UniformBandResult, multiplier_bootstrap

__all__ = [
    "Dataset",
    "EstimateResult",
    "EstimationConfig",
    "FoldAssignment",
    "FoldNuisances",
    "KernelSpec",
    "LearnerSpec",
    "PartialEffectResult",
    "TreatmentGrid",
    "UniformBandResult",
    "dataset_from_columns",
    "dml_beta",
    "dml_theta",
    "estimate_curve",
    "fit_fold_nuisances",
    "make_folds",
    "multiplier_bootstrap",
    "optimal_bandwidth_integrated",
    "optimal_bandwidth_pointwise",
    "rule_of_thumb_bandwidth",
]
