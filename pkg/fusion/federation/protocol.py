"""
Site-side and target-side steps of the two-round protocol.

Round 1: every source sends its size, covariate moments and the mean of its ξ basis.
The target fits the density ratios, solves β, fits every broadcast nuisance model
and broadcasts the package. Round 2: every site (target included) sends H_s, L_s,
I_s and the variance aggregates; the target fuses them into the estimate.
"""

import logging

import numpy as np

from common.numerics.exceptions import NoConvergenceError
from fusion.config import EstimationConfig
from fusion.enums import SourcePolicy
from fusion.exceptions import ProtocolError, SiteTimeoutError
from fusion.federation.messages import BroadcastPackage, Round1Summary, Round2Summary
from fusion.reports import to_plain
from fusion.services.combine import one_step_report
from fusion.services.covariate_shift import CovariateFeatureSpec, fit_covariate_tilt
from fusion.services.gradient import ShiftFamily, build_context, plug_in_effect
from fusion.services.nuisance import TargetModels, fit_nuisances
from fusion.services.outcome_shift import solve_beta

logger = logging.getLogger(__name__)


def protocol_feature_spec(dimension, config):
    return CovariateFeatureSpec(dimension, config.feature_degree)


def source_round1(data, basis=None, config=None, feature_spec=None):
    """Round-1 summary of a source.

    Parameters
    ----------
    data : SiteDataset
        Source records
    basis : BasisVector, optional
        ξ_s of the source's weight function; ``None`` means no outcome shift
    config : EstimationConfig, optional
        Supplies the feature degree when ``feature_spec`` is omitted
    feature_spec : CovariateFeatureSpec, optional
        Protocol-wide covariate feature basis

    Raises
    ------
    DomainError
        If an expression cannot be evaluated on the source's records
    """
    config = config or EstimationConfig.from_settings()
    feature_spec = feature_spec or protocol_feature_spec(data.dimension, config)
    if basis is None:
        forms, xi_mean = [], np.zeros(0)
    else:
        forms = basis.forms
        xi_mean = basis.evaluate(data.X, data.A, data.Y).mean(axis=0)
    summary = Round1Summary(
        data.site_id,
        data.n,
        data.dimension,
        feature_spec.moments(data.X, data.A),
        forms,
        xi_mean,
    )
    logger.info(f"Source {data.site_id}: round-1 summary over {data.n} records")
    return summary


def _check_round1(target, round1):
    seen = {target.site_id}
    for summary in round1:
        if summary.site_id in seen:
            raise ProtocolError(
                f"Duplicate site id {summary.site_id} in round 1",
                details={"site_id": summary.site_id},
            )
        seen.add(summary.site_id)
        if summary.dimension != target.dimension:
            raise ProtocolError(
                f"Source {summary.site_id} reports {summary.dimension} covariates, "
                f"target has {target.dimension}"
            )


def fit_covariate_shifts(target, round1, feature_spec, config):
    """Fit λ̂_s for every source from its moments, applying the source policy.

    Returns
    -------
    tuple
        ``(lambdas, excluded)`` with ``excluded`` mapping source ids to reasons
    """
    lambdas, excluded = {}, {}
    for summary in round1:
        try:
            lambdas[summary.site_id] = fit_covariate_tilt(
                target, summary.moments, summary.n, feature_spec
            )
        except NoConvergenceError as exc:
            if config.source_policy == SourcePolicy.ABORT:
                raise
            logger.warning(
                f"Excluding source {summary.site_id}: covariate tilt failed ({exc})"
            )
            excluded[summary.site_id] = f"covariate shift: {exc}"
    return lambdas, excluded


def assemble_package(
    target, round1, lambdas, target_models, config, feature_spec, excluded=None
):
    """Solve β on the included sources, fit the nuisances and build the package."""
    excluded = dict(excluded or {})
    candidates = [summary for summary in round1 if summary.site_id in lambdas]
    weights, normalizers, results = solve_beta(
        target, candidates, lambdas, target_models.regression, config
    )
    for site_id, result in results.items():
        if not result.converged:
            excluded[site_id] = f"outcome shift: {result.error}"
    included = weights.source_ids
    site_sizes = {target.site_id: target.n}
    for summary in candidates:
        if summary.site_id in included:
            site_sizes[summary.site_id] = summary.n
    included_lambdas = {site_id: lambdas[site_id] for site_id in included}
    family = ShiftFamily(site_sizes, weights, normalizers, included_lambdas)
    nuisances, clamped = fit_nuisances(family, target_models, config)
    diagnostics = {
        "sources": {
            site_id: result.to_diagnostics() for site_id, result in results.items()
        },
        "excluded": excluded,
        "target_clamped": clamped,
    }
    package = BroadcastPackage(
        config,
        target.dimension,
        site_sizes,
        feature_spec,
        included_lambdas,
        weights,
        normalizers,
        nuisances,
        to_plain(diagnostics),
    )
    return package.check_consistency()


def target_estimate_and_broadcast(target, round1, config=None, target_models=None):
    """Target step between the rounds: fit every shift and nuisance, build the package.

    Parameters
    ----------
    target : SiteDataset
        Target records
    round1 : list
        Round-1 summaries of the sources that reported (may be empty)
    config : EstimationConfig, optional
        Protocol-wide settings
    target_models : TargetModels, optional
        Precomputed π̂, μ̂ and sieve projector

    Returns
    -------
    BroadcastPackage
        Consistency-checked package

    Raises
    ------
    ProtocolError
        On duplicate site ids or covariate dimension mismatches
    NoConvergenceError
        When a source fails under the ``abort`` policy
    """
    config = config or EstimationConfig.from_settings()
    _check_round1(target, round1)
    target_models = target_models or TargetModels(target, config)
    feature_spec = protocol_feature_spec(target.dimension, config)
    lambdas, excluded = fit_covariate_shifts(target, round1, feature_spec, config)
    package = assemble_package(
        target, round1, lambdas, target_models, config, feature_spec, excluded
    )
    logger.info(
        f"Target {target.site_id}: broadcasting package for sources {package.source_ids} "
        f"(excluded {sorted(package.diagnostics['excluded']) or 'none'})"
    )
    return package


def overlap_ratio(package, data):
    """Largest max/min ratio of λ̂_s · w*_s over the site's records."""
    if not package.source_ids:
        return 1.0
    family = package.shift_family()
    product = family.wstar(data.X, data.A, data.Y) * family.lambda_bar(data.X, data.A)
    product = product[:, 1:]
    return float(np.max(product.max(axis=0) / product.min(axis=0)))


def evaluate_site(data, package, centering=None):
    """Per-record gradient pieces of a site under a broadcast package.

    Raises
    ------
    ProtocolError
        If the site is not part of the package or its size differs from the one
        announced
    """
    if data.site_id not in package.site_sizes:
        raise ProtocolError(f"Site {data.site_id} is not part of the broadcast package")
    if package.site_sizes[data.site_id] != data.n:
        raise ProtocolError(
            f"Site {data.site_id} has {data.n} records, package announces "
            f"{package.site_sizes[data.site_id]}"
        )
    return build_context(package, data, centering).evaluate()


def round2_summary(data, package, evaluation):
    """Round2Summary of an evaluated site with its clamp and overlap diagnostics."""
    diagnostics = {
        "clamped": evaluation.clamped,
        "overlap_ratio": overlap_ratio(package, data),
    }
    logger.info(f"Site {data.site_id}: round-2 summary over {data.n} records")
    return Round2Summary.from_evaluation(evaluation, to_plain(diagnostics))


def site_round2(data, package, centering=None):
    """Round-2 summary of a site (H_s, L_s, I_s and the variance aggregates)."""
    return round2_summary(data, package, evaluate_site(data, package, centering))


def target_fuse(round2, package, target, evaluation=None, estimator="eco_ate"):
    """Fuse the round-2 summaries into the ECO-ATE report.

    Sources without a round-2 summary are dropped from the fusion (or abort the run
    under the ``abort`` policy); the target's own summary is mandatory.

    Parameters
    ----------
    round2 : list
        Round2Summary of every reporting site
    package : BroadcastPackage
        Package the sites evaluated
    target : SiteDataset
        Target records
    evaluation : SiteEvaluation, optional
        Target evaluation matching its round-2 summary; recomputed when omitted

    Returns
    -------
    EstimateReport
    """
    config = package.config
    received = {}
    for summary in round2:
        if summary.site_id in received:
            raise ProtocolError(f"Duplicate round-2 summary from site {summary.site_id}")
        if summary.site_id not in package.site_sizes:
            raise ProtocolError(f"Round-2 summary from unknown site {summary.site_id}")
        if summary.n != package.site_sizes[summary.site_id]:
            raise ProtocolError(
                f"Site {summary.site_id} reports n={summary.n}, package announces "
                f"{package.site_sizes[summary.site_id]}"
            )
        received[summary.site_id] = summary
    if target.site_id not in received:
        raise ProtocolError("The target's round-2 summary is missing")

    missing = [site_id for site_id in package.source_ids if site_id not in received]
    if missing:
        if config.source_policy == SourcePolicy.ABORT:
            raise SiteTimeoutError(
                f"No round-2 summary from sources {missing}", details={"missing": missing}
            )
        logger.warning(f"Fusing without sources {missing}: no round-2 summary")

    evaluation = evaluation or evaluate_site(target, package)
    sizes = {
        site_id: package.site_sizes[site_id]
        for site_id in package.site_sizes
        if site_id in received
    }
    summaries = {site_id: received[site_id].as_summary() for site_id in sizes}
    diagnostics = dict(package.diagnostics)
    excluded = dict(diagnostics.get("excluded", {}))
    excluded.update({site_id: "no round-2 summary" for site_id in missing})
    diagnostics["excluded"] = excluded
    diagnostics["sites"] = {site_id: received[site_id].diagnostics for site_id in sizes}

    report, fused = one_step_report(
        estimator,
        evaluation,
        summaries,
        sizes,
        plug_in_effect(package.nuisance_models.outcome, target.X),
        config,
        diagnostics=diagnostics,
    )
    logger.info(f"Target {target.site_id}: {report}")
    return report
