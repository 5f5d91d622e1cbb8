"""
Services module for fusion app.
"""

from fusion.services.combine import (
    FusedQuantities,
    federated_standard_error,
    fuse_summaries,
    one_step_report,
    variance_ci,
)
from fusion.services.covariate_shift import (
    CovariateFeatureSpec,
    CovariateShiftModel,
    evaluate_lambda,
    fit_covariate_classifier,
    fit_covariate_tilt,
)
from fusion.services.gradient import (
    GradientContext,
    NuisanceModels,
    ShiftFamily,
    SiteEvaluation,
    build_context,
    canonical_gradient_eff,
)
from fusion.services.nuisance import TargetModels, fit_nuisances
from fusion.services.outcome_shift import (
    NormalizerModel,
    OutcomeShiftSolver,
    WeightModel,
    estimate_normalizer,
    solve_beta,
)
from fusion.services.regression import KernelRegression, SieveRegression

__all__ = [
    "CovariateFeatureSpec",
    "CovariateShiftModel",
    "FusedQuantities",
    "GradientContext",
    "KernelRegression",
    "NormalizerModel",
    "NuisanceModels",
    "OutcomeShiftSolver",
    "ShiftFamily",
    "SieveRegression",
    "SiteEvaluation",
    "TargetModels",
    "WeightModel",
    "build_context",
    "canonical_gradient_eff",
    "estimate_normalizer",
    "evaluate_lambda",
    "federated_standard_error",
    "fit_covariate_classifier",
    "fit_covariate_tilt",
    "fit_nuisances",
    "fuse_summaries",
    "one_step_report",
    "solve_beta",
    "variance_ci",
]
