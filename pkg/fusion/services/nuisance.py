"""
Target-side fits of every conditional expectation given (A, X, S=0).
"""

import logging

import numpy as np

from common.numerics import LogisticModel, Standardizer
from fusion.services.gradient import NuisanceModels, aipw_residual
from fusion.services.regression import SieveRegression

logger = logging.getLogger(__name__)


class TargetModels:
    """Target fits shared by every estimator: standardization, sieve projector, π̂, μ̂.

    Parameters
    ----------
    target : SiteDataset
        Target site data; both arms must be present
    config : EstimationConfig
        Sieve degree and ridge

    Raises
    ------
    EmptyArmError
        If the target lacks a treatment arm
    SeparationError
        If the propensity model separates the arms
    """

    def __init__(self, target, config):
        target.require_both_arms()
        self.target = target
        self.standardizer = Standardizer.from_data(target.X)
        self.regression = SieveRegression(
            target.X, target.A, self.standardizer, config.sieve_degree, config.ridge
        )
        self.propensity = LogisticModel.fit(target.X, target.A, self.standardizer)
        self.outcome = self.regression.fit(target.Y)


def fit_nuisances(family, target_models, config, regression=None):
    """Fit the broadcast conditional expectations on the target sample.

    Parameters
    ----------
    family : ShiftFamily
        Site probabilities and fitted shifts
    target_models : TargetModels
        Shared π̂, μ̂ and sieve projector
    config : EstimationConfig
        Propensity clamp
    regression : SieveRegression or KernelRegression, optional
        Estimator for the conditional expectations; the target sieve when omitted

    Returns
    -------
    tuple
        ``(NuisanceModels, clamped)`` with the target's propensity clamp count
    """
    regression = regression or target_models.regression
    target = target_models.target
    X, A, Y = target.X, target.A, target.Y
    wbar, r, r_bar = family.eval_wstar_r(X, A, Y)

    r_wstar = regression.fit(wbar * r[:, None])
    r_wstar_outer = regression.fit(r[:, None, None] * wbar[:, :, None] * wbar[:, None, :])

    residual, clamped = aipw_residual(
        target_models.propensity, target_models.outcome, X, A, Y, config.propensity_clamp
    )
    dtilde = r * residual
    dtilde_model = regression.fit(dtilde)
    dtilde_wstar = regression.fit(dtilde[:, None] * wbar)

    xi = family.weights.xi_stacked(X, A, Y)
    xi_alignment = regression.fit(xi[:, :, None] * wbar[:, None, :])
    aligned = np.asarray(xi_alignment.predict(X, A)).reshape(
        target.n, xi.shape[1], family.k + 1
    )
    atilde = xi - np.einsum("nqm,nm->nq", aligned, r_bar)
    atilde_model = regression.fit(atilde)
    atilde_wstar = regression.fit(atilde[:, :, None] * wbar[:, None, :])

    logger.debug(
        f"Fitted nuisance models on {target.n} target records "
        f"(k={family.k}, q={family.score_dimension})"
    )
    models = NuisanceModels(
        propensity=target_models.propensity,
        outcome=target_models.outcome,
        r_wstar=r_wstar,
        r_wstar_outer=r_wstar_outer,
        dtilde=dtilde_model,
        dtilde_wstar=dtilde_wstar,
        xi_alignment=xi_alignment,
        atilde=atilde_model,
        atilde_wstar=atilde_wstar,
    )
    return models, clamped
