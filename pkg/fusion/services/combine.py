"""
Target-side fusion of the per-site gradient summaries into the one-step estimate.
"""

import logging

import numpy as np

from common.numerics import pinv, symmetrize
from fusion.enums import FusionWeighting
from fusion.reports import Z_95, EstimateReport
from fusion.services.gradient import canonical_gradient_eff

logger = logging.getLogger(__name__)


class FusedQuantities:
    """Î, Ĉ, c = Î⁻ Ĉᵀ, the corrections M_s and the fused estimate φ̂."""

    def __init__(self, estimate, information, cross, c, corrections, weights, plug_in):
        self.estimate = float(estimate)
        self.information = information
        self.cross = cross
        self.c = c
        self.corrections = corrections
        self.weights = weights
        self.plug_in = float(plug_in)


def fusion_weights(sizes, weighting=FusionWeighting.UNIFORM):
    """Site weights of the fused average: 1/(k+1) each or n_s/n."""
    site_ids = list(sizes)
    if weighting == FusionWeighting.SIZE:
        total = float(sum(sizes.values()))
        return {site_id: sizes[site_id] / total for site_id in site_ids}
    return {site_id: 1.0 / len(site_ids) for site_id in site_ids}


def target_cross_moment(evaluation):
    """Ĉ: target mean of the AIPW residual times ℓ̇*(Z, 0)."""
    return (evaluation.residual[:, None] * evaluation.score).mean(axis=0)


def fuse_summaries(
    summaries, sizes, cross, plug_in, weighting=FusionWeighting.UNIFORM, pinv_tol=1e-10
):
    """Fuse round-2 summaries.

    φ̂ = Σ_s ω_s (H_s + M_s) + N₀ with M_s = Ĉ Î⁻ L_s and Î = Σ_s P(S=s) I_s.

    Parameters
    ----------
    summaries : dict
        Site id -> dict with ``h`` (float), ``l`` (q,) and ``i`` (q, q)
    sizes : dict
        Site id -> sample size, for every summarized site
    cross : numpy.ndarray
        Target cross moment Ĉ of length q
    plug_in : float
        N₀, the target mean of μ̂(1, X) − μ̂(0, X)
    weighting : str, optional
        ``uniform`` (1/(k+1)) or ``size`` (n_s/n)
    pinv_tol : float, optional
        Relative tolerance of the pseudoinverse of Î

    Returns
    -------
    FusedQuantities
        Fused estimate and the pieces needed for its standard error
    """
    total = float(sum(sizes.values()))
    cross = np.asarray(cross, dtype=float).reshape(-1)
    q = cross.shape[0]
    information = np.zeros((q, q))
    for site_id, summary in summaries.items():
        share = sizes[site_id] / total
        information += share * np.asarray(summary["i"], dtype=float).reshape(q, q)
    information = symmetrize(information)
    if q and np.linalg.matrix_rank(information) < q:
        logger.warning(
            f"Fused information matrix is singular (rank "
            f"{np.linalg.matrix_rank(information)} < {q}); using the pseudoinverse"
        )
    c = pinv(information, pinv_tol) @ cross if q else np.zeros(0)

    weights = fusion_weights(sizes, weighting)
    corrections = {}
    estimate = float(plug_in)
    for site_id, summary in summaries.items():
        correction = 0.0
        if q:
            correction = float(c @ np.asarray(summary["l"], dtype=float).reshape(q))
        corrections[site_id] = correction
        estimate += weights[site_id] * (float(summary["h"]) + correction)
    return FusedQuantities(estimate, information, cross, c, corrections, weights, plug_in)


def variance_ci(values, point):
    """Standard error and 95% CI from influence-function values.

    SE = sqrt(sample variance / n); CI = point ± 1.96·SE.

    Returns
    -------
    tuple
        ``(se, (lower, upper))``
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] < 2:
        raise ValueError("Variance needs at least two gradient values")
    se = float(np.sqrt(values.var(ddof=1) / values.shape[0]))
    return se, (point - Z_95 * se, point + Z_95 * se)


def federated_standard_error(fused, summaries, sizes, target_id, target_values):
    """SE of φ̂ from the target's own D̂^eff and the sources' moment aggregates.

    For a source, the mean of D̂^eff = D̂ + cᵀℓ̇* is H_s + cᵀL_s and its second
    moment is h2_s + 2cᵀhl_s + cᵀI_s c; pooling with the target's values
    reproduces the sample variance over all records.
    """
    c = fused.c
    target_values = np.asarray(target_values, dtype=float).reshape(-1)
    count = float(target_values.shape[0])
    first = float(target_values.sum())
    second = float(np.sum(target_values**2))
    for site_id, summary in summaries.items():
        if site_id == target_id:
            continue
        n_site = float(sizes[site_id])
        mean = float(summary["h"])
        square = float(summary["h2"])
        if c.shape[0]:
            q = c.shape[0]
            mean += float(c @ np.asarray(summary["l"], dtype=float).reshape(q))
            square += 2.0 * float(c @ np.asarray(summary["hl"], dtype=float).reshape(q))
            square += float(c @ np.asarray(summary["i"], dtype=float).reshape(q, q) @ c)
        count += n_site
        first += n_site * mean
        second += n_site * square
    if count < 2:
        raise ValueError("Variance needs at least two gradient values")
    variance = max((second - first**2 / count) / (count - 1.0), 0.0)
    return float(np.sqrt(variance / count))


def one_step_report(
    estimator,
    target_evaluation,
    summaries,
    sizes,
    plug_in_values,
    config,
    sources_used=None,
    diagnostics=None,
):
    """Fuse summaries, assemble D̂^eff at the target and build the estimate report.

    Parameters
    ----------
    estimator : str
        Name stamped on the report
    target_evaluation : SiteEvaluation
        Per-record D̂, ℓ̇* and AIPW residual at the target
    summaries : dict
        Site id -> round-2 summary dict (``h``, ``l``, ``i``, ``h2``, ``hl``) for every
        site entering the fusion, target included
    sizes : dict
        Site id -> sample size of the same sites
    plug_in_values : numpy.ndarray
        μ̂(1, x) − μ̂(0, x) at the target records
    config : EstimationConfig
        Fusion weighting and pseudoinverse tolerance

    Returns
    -------
    tuple
        ``(EstimateReport, FusedQuantities)``
    """
    target_id = target_evaluation.site_id
    plug_in_values = np.asarray(plug_in_values, dtype=float).reshape(-1)
    fused = fuse_summaries(
        summaries,
        sizes,
        target_cross_moment(target_evaluation),
        plug_in_values.mean(),
        config.fusion_weighting,
        config.pinv_tol,
    )
    probability = sizes[target_id] / float(sum(sizes.values()))
    values = canonical_gradient_eff(
        target_evaluation,
        fused,
        target_site=True,
        probability=probability,
        plug_in=plug_in_values,
    )
    se = federated_standard_error(fused, summaries, sizes, target_id, values)
    report = EstimateReport(
        estimator,
        fused.estimate,
        se,
        sources_used=[site_id for site_id in sizes if site_id != target_id],
        diagnostics={
            **(diagnostics or {}),
            "corrections": fused.corrections,
            "plug_in": fused.plug_in,
        },
        n_total=int(sum(sizes.values())),
    )
    if sources_used is not None:
        report.sources_used = list(sources_used)
    return report, fused
