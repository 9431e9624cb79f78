from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

KINDS = ("lasso", "kernel_regression", "random_forest", "constant")


@dataclass(frozen=True)
class LearnerSpec:
    """Which conditional-mean learner to fit, and its hyperparameters.

    Only the fields relevant to ``kind`` are read.  ``constant`` is the
    intercept-only regression, useful as a deliberately misspecified nuisance.
    """

    kind: str = "lasso"
    # lasso
    lambdas: Optional[Tuple[float, ...]] = None
    n_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    cv_folds: int = 10
    degree: int = 3
    # random forest
    n_trees: int = 1000
    min_leaf: int = 40
    min_leaf_grid: Optional[Tuple[int, ...]] = None
    feature_fraction: float = 1.0 / 3.0
    # kernel regression
    bandwidth_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        if self.lambdas is not None:
            if len(self.lambdas) == 0 or min(self.lambdas) <= 0:
                raise ValueError("penalty grid must be nonempty and positive")
        if self.n_lambdas < 1 or self.cv_folds < 2 or self.degree < 1:
            raise ValueError("invalid lasso hyperparameters")
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")
        if self.min_leaf_grid is not None and min(self.min_leaf_grid) < 1:
            raise ValueError("min_leaf_grid entries must be >= 1")
        if not 0 < self.feature_fraction <= 1:
            raise ValueError("feature_fraction must lie in (0, 1]")
        if not self.bandwidth_scale > 0:
            raise ValueError("bandwidth_scale must be positive")

    @property
    def min_rows(self) -> int:
        if self.kind == "random_forest":
            return max(2, min(self.min_leaf_grid or (self.min_leaf,)))
        return 2
