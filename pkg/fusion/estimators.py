"""
ECO-ATE and the comparison estimators.

Every pipeline estimator shares the target's ``TargetModels`` (standardization, sieve
projector, π̂ and μ̂), so differences between estimators come from the fusion alone.
"""

import logging

import numpy as np

from common.numerics import KernelModel
from common.numerics.exceptions import SeparationError
from fusion.config import EstimationConfig
from fusion.enums import BetaMethod, SourcePolicy
from fusion.exceptions import ZeroVarianceError
from fusion.federation.protocol import (
    evaluate_site,
    protocol_feature_spec,
    round2_summary,
    site_round2,
    source_round1,
    target_estimate_and_broadcast,
    target_fuse,
)
from fusion.reports import EstimateReport
from fusion.services.combine import one_step_report, variance_ci
from fusion.services.covariate_shift import fit_covariate_classifier
from fusion.services.gradient import (
    GradientContext,
    ShiftFamily,
    aipw_residual,
    plug_in_effect,
)
from fusion.services.nuisance import TargetModels, fit_nuisances
from fusion.services.outcome_shift import solve_beta
from fusion.services.regression import KernelRegression

logger = logging.getLogger(__name__)


def _setup(target, config, target_models):
    config = config or EstimationConfig.from_settings()
    return config, target_models or TargetModels(target, config)


def run_eco_ate(target, sources, config=None, target_models=None, estimator="eco_ate"):
    """ECO-ATE through the two-round protocol, in process and without a transport.

    Parameters
    ----------
    target : SiteDataset
        Target records
    sources : list
        ``(SiteDataset, BasisVector or None)`` per source; the empty list gives the
        target-only one-step estimator
    config : EstimationConfig, optional
        Protocol-wide settings
    target_models : TargetModels, optional
        Shared target fits

    Returns
    -------
    EstimateReport
    """
    config, target_models = _setup(target, config, target_models)
    feature_spec = protocol_feature_spec(target.dimension, config)
    round1 = [source_round1(data, basis, config, feature_spec) for data, basis in sources]
    package = target_estimate_and_broadcast(target, round1, config, target_models)
    evaluation = evaluate_site(target, package)
    round2 = [round2_summary(target, package, evaluation)]
    round2.extend(
        site_round2(data, package)
        for data, _ in sources
        if data.site_id in package.site_sizes
    )
    return target_fuse(round2, package, target, evaluation, estimator)


def aipw_target_only(target, config=None, target_models=None, centered=True):
    """One-step AIPW estimator on the target alone.

    ``centered=True`` runs the k=0 protocol, so the result equals ECO-ATE without
    sources exactly. ``centered=False`` returns the textbook N₀ + mean AIPW residual
    with the sandwich standard error.

    Raises
    ------
    EmptyArmError
        If the target lacks a treatment arm
    """
    config, target_models = _setup(target, config, target_models)
    if centered:
        return run_eco_ate(target, [], config, target_models, estimator="target_only")
    residual, clamped = aipw_residual(
        target_models.propensity,
        target_models.outcome,
        target.X,
        target.A,
        target.Y,
        config.propensity_clamp,
    )
    values = plug_in_effect(target_models.outcome, target.X) + residual
    estimate = float(values.mean())
    se, _ = variance_ci(values, estimate)
    return EstimateReport(
        "target_only",
        estimate,
        se,
        diagnostics={"target_clamped": clamped, "centered": False},
        n_total=target.n,
    )


def naive_fusion(target, sources, config=None, target_models=None):
    """ECO-ATE pipeline assuming exchangeable outcomes: w_s ≡ 1, λ_s still fitted."""
    return run_eco_ate(
        target,
        [(data, None) for data, _ in sources],
        config,
        target_models,
        estimator="naive",
    )


def _source_smoother(target, source, bandwidth):
    """Kernel weights mapping target responses to Ê[· | a, x, S=0] at source records."""
    zeros = KernelModel(target.X, np.zeros(target.n), target.A, bandwidth)
    return zeros.smoother_matrix(source.X, source.A)


def oracle_pooled(target, sources, config=None, target_models=None, estimator="oracle"):
    """ECO-ATE with individual-level access to every site.

    λ_s comes from logistic classification of site membership, normalizers and
    every conditional expectation from kernel regression on the target, and β from
    centralized moment matching or, with ``beta_method=likelihood``, the conditional
    likelihood score on the source records.
    """
    config, target_models = _setup(target, config, target_models)
    feature_spec = protocol_feature_spec(target.dimension, config)
    datasets = {data.site_id: data for data, _ in sources}
    bases = {data.site_id: basis for data, basis in sources}

    lambdas, excluded = {}, {}
    for site_id, data in datasets.items():
        try:
            lambdas[site_id] = fit_covariate_classifier(target, data, feature_spec)
        except SeparationError as exc:
            if config.source_policy == SourcePolicy.ABORT:
                raise
            logger.warning(f"Oracle: excluding source {site_id} ({exc})")
            excluded[site_id] = f"covariate shift: {exc}"

    regression = KernelRegression(target.X, target.A, config.kernel_bandwidth)
    likelihood_inputs = None
    if config.beta_method == BetaMethod.LIKELIHOOD:
        likelihood_inputs = {
            site_id: (
                datasets[site_id],
                _source_smoother(target, datasets[site_id], config.kernel_bandwidth),
            )
            for site_id in lambdas
            if bases[site_id] is not None
        }
    round1 = [
        source_round1(datasets[site_id], bases[site_id], config, feature_spec)
        for site_id in lambdas
    ]
    weights, normalizers, results = solve_beta(
        target,
        round1,
        lambdas,
        regression,
        config,
        bases=bases,
        likelihood_inputs=likelihood_inputs,
    )
    for site_id, result in results.items():
        if not result.converged:
            excluded[site_id] = f"outcome shift: {result.error}"

    site_sizes = {target.site_id: target.n}
    site_sizes.update({site_id: datasets[site_id].n for site_id in weights.source_ids})
    source_lambdas = {site_id: lambdas[site_id] for site_id in weights.source_ids}
    family = ShiftFamily(site_sizes, weights, normalizers, source_lambdas)
    nuisances, clamped = fit_nuisances(
        family, target_models, config, regression=regression
    )
    local = {target.site_id: target, **datasets}
    evaluations = {
        site_id: GradientContext(family, nuisances, local[site_id], config).evaluate()
        for site_id in site_sizes
    }
    diagnostics = {
        "sources": {
            site_id: result.to_diagnostics() for site_id, result in results.items()
        },
        "excluded": excluded,
        "target_clamped": clamped,
    }
    report, _ = one_step_report(
        estimator,
        evaluations[target.site_id],
        {site_id: evaluation.summaries() for site_id, evaluation in evaluations.items()},
        site_sizes,
        plug_in_effect(target_models.outcome, target.X),
        config,
        diagnostics=diagnostics,
    )
    logger.info(f"Oracle: {report}")
    return report


def meta_ivw(reports, estimator="meta_ivw"):
    """Inverse-variance weighted mean of independent estimates.

    Raises
    ------
    ValueError
        If ``reports`` is empty
    ZeroVarianceError
        If any standard error is zero
    """
    reports = list(reports)
    if not reports:
        raise ValueError("Meta-analysis needs at least one estimate")
    se = np.array([report.se for report in reports])
    if np.any(se == 0):
        zero = [report.estimator for report in reports if report.se == 0]
        raise ZeroVarianceError(
            "Inverse-variance weights need positive standard errors",
            details={"estimators": zero},
        )
    precision = 1.0 / se**2
    estimates = np.array([report.estimate for report in reports])
    estimate = float(np.sum(precision * estimates) / precision.sum())
    sources = [site_id for report in reports for site_id in report.sources_used]
    return EstimateReport(
        estimator,
        estimate,
        float(precision.sum() ** -0.5),
        sources_used=sources,
        diagnostics={"weights": (precision / precision.sum()).tolist()},
        n_total=sum(report.n_total or 0 for report in reports) or None,
    )


def meta_ivw_sites(datasets, config=None):
    """Meta-analysis of per-site AIPW estimates, each site acting as its own target."""
    reports = []
    for data in datasets:
        report = aipw_target_only(data, config, centered=False)
        report.sources_used = [data.site_id]
        reports.append(report)
    return meta_ivw(reports)
