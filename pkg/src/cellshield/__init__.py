"""Cellwise-robust regularized discriminant analysis."""

from .classifier import (
    METHODS,
    ClassificationReport,
    DiscriminantModel,
    classify,
    discriminant_scores,
    fit_method,
    kl_distance,
    load_model,
    method_components,
    save_model,
)
from .datasets import LabeledDataset
from .estimator import RegularizedDiscriminantClassifier
from .exceptions import DegenerateGridError, NotComputableError
from .outliers import OutlierReport, chi_square_quantile, detect
from .robust import (
    GroupSummaries,
    group_summaries,
    kendall_tau,
    pairwise_cov_matrix,
    qn_scale,
)
from .selection import SelectionResult, bic, count_df, grid_bounds, select_model
from .simulate import BenchResult, ScenarioSpec, contaminate, generate, run_bench
from .solvers import (
    PrecisionSet,
    SolverOptions,
    fused_prox,
    graphical_lasso,
    invert_pd,
    joint_graphical_lasso,
    rda_covariances,
)

__version__ = "0.1.0"

__all__ = [
    "BenchResult",
    "ClassificationReport",
    "DegenerateGridError",
    "DiscriminantModel",
    "GroupSummaries",
    "LabeledDataset",
    "METHODS",
    "NotComputableError",
    "OutlierReport",
    "PrecisionSet",
    "RegularizedDiscriminantClassifier",
    "ScenarioSpec",
    "SelectionResult",
    "SolverOptions",
    "bic",
    "chi_square_quantile",
    "classify",
    "contaminate",
    "count_df",
    "detect",
    "discriminant_scores",
    "fit_method",
    "fused_prox",
    "generate",
    "graphical_lasso",
    "grid_bounds",
    "group_summaries",
    "invert_pd",
    "joint_graphical_lasso",
    "kendall_tau",
    "kl_distance",
    "load_model",
    "method_components",
    "pairwise_cov_matrix",
    "qn_scale",
    "rda_covariances",
    "run_bench",
    "save_model",
    "select_model",
    "__version__",
]
