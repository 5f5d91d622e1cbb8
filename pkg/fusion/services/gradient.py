"""
Efficient-influence-function machinery evaluated on one site's records.

Sites are ordered target first, then the included sources. ``w̄*``, ``λ̄`` and ``r̄``
are ``(n, k+1)`` arrays in that order; scores are stacked over the sources' β blocks
(dimension q = dim β). Every conditional expectation given (A, X, S=0) comes from a
``NuisanceModels`` bundle, so the same code runs on broadcast sieve models, on the
oracle's kernel models and on exact population conditionals in tests.
"""

import logging

import numpy as np

from common.exceptions import DimensionMismatchError
from common.numerics import pinv, symmetrize
from fusion.enums import ScoreCentering
from fusion.services.outcome_shift import NormalizerModel
from fusion.services.regression import KernelRegression

logger = logging.getLogger(__name__)


def clamped_propensity(propensity, X, A, clamp):
    """π̂(a, x) clamped to [c, 1 − c] and the number of clamped records."""
    treated = np.asarray(propensity.predict_proba(X), dtype=float).reshape(-1)
    clamped = int(np.sum((treated < clamp) | (treated > 1.0 - clamp)))
    treated = np.clip(treated, clamp, 1.0 - clamp)
    return np.where(np.asarray(A) == 1, treated, 1.0 - treated), clamped


def aipw_residual(propensity, outcome, X, A, Y, clamp=0.01):
    """Indicator-selected AIPW residual (2a − 1)/π̂(a, x) · (y − μ̂(a, x)).

    Returns
    -------
    tuple
        ``(residual, clamped)``
    """
    A = np.asarray(A, dtype=float).reshape(-1)
    probability, clamped = clamped_propensity(propensity, X, A, clamp)
    fitted = np.asarray(outcome.predict(X, A), dtype=float).reshape(-1)
    return (2.0 * A - 1.0) / probability * (np.asarray(Y, dtype=float) - fitted), clamped


def plug_in_effect(outcome, X):
    """μ̂(1, x) − μ̂(0, x) at every row of ``X``."""
    n = np.atleast_2d(X).shape[0]
    treated = np.asarray(outcome.predict(X, np.ones(n))).reshape(-1)
    control = np.asarray(outcome.predict(X, np.zeros(n))).reshape(-1)
    return treated - control


class ShiftFamily:
    """Site probabilities, outcome-shift weights, normalizers and density ratios.

    Parameters
    ----------
    site_sizes : dict
        Site id -> sample size, target first
    weights : WeightModel
        Bases and β̂ of the included sources, in the same order as ``site_sizes``
    normalizers : dict, optional
        Source id -> NormalizerModel; missing entries are the identity
    lambdas : dict, optional
        Source id -> model with ``predict(X, A)``; missing entries are λ ≡ 1
    """

    def __init__(self, site_sizes, weights, normalizers=None, lambdas=None):
        site_ids = [str(site_id) for site_id in site_sizes]
        if not site_ids:
            raise DimensionMismatchError("A shift family needs at least the target site")
        if weights.source_ids != site_ids[1:]:
            raise DimensionMismatchError(
                f"Weight model covers {weights.source_ids}, sites are {site_ids[1:]}"
            )
        sizes = np.array([site_sizes[site_id] for site_id in site_sizes], dtype=float)
        if np.any(sizes < 1):
            raise DimensionMismatchError("Every site needs at least one record")
        self.site_ids = site_ids
        self.sizes = sizes
        self.probabilities = sizes / sizes.sum()
        self.weights = weights
        self.normalizers = dict(normalizers or {})
        self.lambdas = dict(lambdas or {})

    @property
    def target_id(self):
        return self.site_ids[0]

    @property
    def source_ids(self):
        return self.site_ids[1:]

    @property
    def k(self):
        return len(self.site_ids) - 1

    @property
    def n_total(self):
        return int(self.sizes.sum())

    @property
    def score_dimension(self):
        return self.weights.total_dimension

    def site_index(self, site_id):
        return self.site_ids.index(str(site_id))

    def normalizer(self, site_id):
        return self.normalizers.get(site_id) or NormalizerModel(site_id)

    def wstar(self, X, A, Y):
        """w̄*(z) with w*₀ ≡ 1."""
        n = np.atleast_2d(X).shape[0]
        wbar = np.ones((n, self.k + 1))
        for index, site_id in enumerate(self.source_ids, start=1):
            weight = self.weights.weight(site_id, X, A, Y)
            wbar[:, index] = weight / self.normalizer(site_id).predict(X, A)
        return wbar

    def lambda_bar(self, X, A):
        """λ̄(x, a) with λ₀ ≡ 1."""
        n = np.atleast_2d(X).shape[0]
        values = np.ones((n, self.k + 1))
        for index, site_id in enumerate(self.source_ids, start=1):
            if site_id in self.lambdas:
                values[:, index] = self.lambdas[site_id].predict(X, A)
        return values

    def eval_wstar_r(self, X, A, Y):
        """Return ``(w̄*, r, r̄)`` at every record.

        r = 1 / Σ_s w*_s λ_s P(S=s) and r_s = r P(S=s) λ_s w*_s, so Σ_s r_s = 1.
        """
        wbar = self.wstar(X, A, Y)
        mass = wbar * self.lambda_bar(X, A) * self.probabilities
        r = 1.0 / mass.sum(axis=1)
        return wbar, r, mass * r[:, None]


class NuisanceModels:
    """Conditional-expectation models shared by every site of one fusion.

    Each model exposes ``predict(X, A)``; ``propensity`` exposes ``predict_proba(X)``.
    Output shapes per record: ``outcome`` scalar, ``r_wstar`` (k+1), ``r_wstar_outer``
    (k+1, k+1), ``dtilde`` scalar, ``dtilde_wstar`` (k+1), ``xi_alignment`` (q,
    k+1), ``atilde`` (q), ``atilde_wstar`` (q, k+1).
    """

    FIELDS = (
        "propensity",
        "outcome",
        "r_wstar",
        "r_wstar_outer",
        "dtilde",
        "dtilde_wstar",
        "xi_alignment",
        "atilde",
        "atilde_wstar",
    )

    def __init__(self, **models):
        missing = [name for name in self.FIELDS if models.get(name) is None]
        if missing:
            raise DimensionMismatchError(f"Missing nuisance models: {', '.join(missing)}")
        unknown = set(models) - set(self.FIELDS)
        if unknown:
            raise DimensionMismatchError(f"Unknown nuisance models: {sorted(unknown)}")
        for name in self.FIELDS:
            setattr(self, name, models[name])

    def items(self):
        return [(name, getattr(self, name)) for name in self.FIELDS]


class SiteEvaluation:
    """Per-record gradient pieces at one site; never leaves the site."""

    def __init__(self, site_id, gradient, score, residual, clamped):
        self.site_id = site_id
        self.gradient = gradient
        self.score = score
        self.residual = residual
        self.clamped = clamped

    @property
    def n(self):
        return self.gradient.shape[0]

    def summaries(self):
        """Empirical means sent in round 2 (H, L, I and the variance aggregates)."""
        n = self.n
        return {
            "h": float(self.gradient.mean()),
            "l": self.score.mean(axis=0),
            "i": symmetrize(self.score.T @ self.score / n),
            "h2": float(np.mean(self.gradient**2)),
            "hl": (self.gradient[:, None] * self.score).mean(axis=0),
        }


class GradientContext:
    """Evaluates r, M⁻, d̃/d*, ã/a* and ℓ̇* on one site's records.

    Parameters
    ----------
    family : ShiftFamily
        Site probabilities and fitted shifts
    nuisances : NuisanceModels
        Conditional expectations given (A, X, S=0)
    local : SiteDataset
        Records of the evaluating site
    config : EstimationConfig
        Propensity clamp, pseudoinverse tolerance and score centering
    centering : object, optional
        Regression on the local sample with ``fitted(values)``; site-local
        Ê[· | A, X, S=s]. Kernel regression when omitted.
    """

    def __init__(self, family, nuisances, local, config, centering=None):
        self.family = family
        self.nuisances = nuisances
        self.local = local
        self.config = config
        if centering is None:
            centering = KernelRegression(local.X, local.A, config.kernel_bandwidth)
        self.centering = centering
        self.clamped = 0

    def _data(self, X, A, Y):
        if X is None:
            return self.local.X, self.local.A, self.local.Y
        return np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(A, dtype=float), Y

    def _center(self, values):
        """values − Ê[values | A, X, S=s] on the local sample."""
        if values.size == 0:
            return values
        return values - self.centering.fitted(values)

    def aipw_residual(self, X=None, A=None, Y=None):
        """(2a − 1)/π̂(a, x) · (y − μ̂(a, x)); clamp events are counted."""
        X, A, Y = self._data(X, A, Y)
        residual, self.clamped = aipw_residual(
            self.nuisances.propensity,
            self.nuisances.outcome,
            X,
            A,
            Y,
            self.config.propensity_clamp,
        )
        return residual

    def eval_wstar_r(self, X=None, A=None, Y=None):
        X, A, Y = self._data(X, A, Y)
        return self.family.eval_wstar_r(X, A, Y)

    def eval_M(self, X=None, A=None):
        """M(x, a) = Δ⁻¹ − Ê[r w̄* w̄*ᵀ | a, x, S=0], symmetrized; shape (n, k+1, k+1)."""
        if X is None:
            X, A = self.local.X, self.local.A
        outer = np.asarray(self.nuisances.r_wstar_outer.predict(X, A))
        return symmetrize(np.diag(1.0 / self.family.probabilities) - outer)

    def eval_M_pinv(self, X=None, A=None):
        return pinv(self.eval_M(X, A), self.config.pinv_tol)

    def _projection(self, X, A, Y, cross):
        """Ê[v w̄*ᵀ | a, x, S=0] M⁻ᵀ {w̄* r − Ê[w̄* r | a, x, S=0]} for stacked v."""
        wbar, r, _ = self.family.eval_wstar_r(X, A, Y)
        braced = wbar * r[:, None] - np.asarray(self.nuisances.r_wstar.predict(X, A))
        m_pinv = self.eval_M_pinv(X, A)
        return np.einsum("n...j,nkj,nk->n...", cross, m_pinv, braced)

    def eval_dtilde(self, X=None, A=None, Y=None):
        X, A, Y = self._data(X, A, Y)
        _, r, _ = self.family.eval_wstar_r(X, A, Y)
        return r * self.aipw_residual(X, A, Y)

    def eval_dstar(self, X=None, A=None, Y=None):
        """Projected target residual.

        ``d*(z) = d̃ − Ê[d̃ | a, x, S=0]
        + Ê[d̃ w̄*ᵀ | a, x, S=0] M⁻ᵀ {w̄* r − Ê[w̄* r | a, x, S=0]}``
        """
        X, A, Y = self._data(X, A, Y)
        dtilde = self.eval_dtilde(X, A, Y)
        centered = dtilde - np.asarray(self.nuisances.dtilde.predict(X, A)).reshape(-1)
        cross = np.asarray(self.nuisances.dtilde_wstar.predict(X, A))
        return centered + self._projection(X, A, Y, cross)

    def xi_alignment(self, X=None, A=None):
        """Ê[ξ | a, x, S=m] = Ê[w*_m ξ | a, x, S=0] for every membership m.

        Stacked over the score columns, target first; shape (n, q, k+1).
        """
        if X is None:
            X, A = self.local.X, self.local.A
        n = np.atleast_2d(X).shape[0]
        shape = (n, self.family.score_dimension, self.family.k + 1)
        return np.asarray(self.nuisances.xi_alignment.predict(X, A)).reshape(shape)

    def eval_atilde(self, X=None, A=None, Y=None):
        """ã(z) = Σ_m r_m(z) ℓ̇(z, m) with ℓ̇(z, m) = ξ − Ê[ξ | a, x, S=m]."""
        X, A, Y = self._data(X, A, Y)
        xi = self.family.weights.xi_stacked(X, A, Y)
        if xi.shape[1] == 0:
            return xi
        _, _, r_bar = self.family.eval_wstar_r(X, A, Y)
        return xi - np.einsum("nqm,nm->nq", self.xi_alignment(X, A), r_bar)

    def eval_astar(self, X=None, A=None, Y=None):
        """a*(z), the d* construction applied to ã; shape (n, q)."""
        X, A, Y = self._data(X, A, Y)
        atilde = self.eval_atilde(X, A, Y)
        if atilde.shape[1] == 0:
            return atilde
        n = atilde.shape[0]
        centered = atilde - np.asarray(self.nuisances.atilde.predict(X, A)).reshape(n, -1)
        cross = np.asarray(self.nuisances.atilde_wstar.predict(X, A)).reshape(
            n, atilde.shape[1], self.family.k + 1
        )
        return centered + self._projection(X, A, Y, cross)

    def score(self, site_id=None):
        """ℓ̇(z, s) = ξ − Ê[ξ | a, x, S=s] on the local records; shape (n, q).

        Membership of the local site is centered by the local regression; another
        membership, or ``score_centering=broadcast``, uses the alignment model of s.
        """
        site_id = self.local.site_id if site_id is None else str(site_id)
        X, A, Y = self.local.X, self.local.A, self.local.Y
        xi = self.family.weights.xi_stacked(X, A, Y)
        if xi.shape[1] == 0:
            return xi
        local = site_id == self.local.site_id
        if local and self.config.score_centering == ScoreCentering.KERNEL:
            return self._center(xi)
        return xi - self.xi_alignment(X, A)[:, :, self.family.site_index(site_id)]

    def efficient_score(self):
        """ℓ̇*(z, s) = ℓ̇(z, s) − {a*(z) − Ê[a* | a, x, S=s]} on the local records."""
        astar = self.eval_astar()
        if astar.shape[1] == 0:
            return astar
        return self.score() - self._center(astar)

    def gradient(self):
        """D(z, s) = d*(z) − Ê[d* | a, x, S=s] on the local records."""
        return self._center(self.eval_dstar())

    def evaluate(self):
        """All round-2 pieces at the local site."""
        residual = self.aipw_residual()
        clamped = self.clamped
        if clamped:
            logger.warning(
                f"Propensity clamped at {clamped} records of site {self.local.site_id}"
            )
        gradient = self.gradient()
        score = self.efficient_score()
        return SiteEvaluation(self.local.site_id, gradient, score, residual, clamped)


def build_context(package, local, centering=None):
    """Gradient context for ``local`` from a broadcast package.

    Raises
    ------
    DimensionMismatchError
        If the package's covariate dimension differs from the site's
    """
    if package.dimension != local.dimension:
        raise DimensionMismatchError(
            f"Broadcast expects {package.dimension} covariates, site {local.site_id} "
            f"has {local.dimension}"
        )
    return GradientContext(
        package.shift_family(), package.nuisance_models, local, package.config, centering
    )


def canonical_gradient_eff(
    evaluation, fused, target_site=False, probability=None, plug_in=None
):
    """D̂^eff at every record of one site.

    D̂^eff(z, s) = D̂(z, s) + 1(s=0)/P(S=0) · (μ̂(1, x) − μ̂(0, x) − φ̂) + cᵀ ℓ̇*(z, s),
    with c = Î⁻ Ĉᵀ. The correction enters with the sign of the fused M_s term, so
    the one-step estimate equals the plug-in plus the size-weighted mean of the
    gradient.

    Parameters
    ----------
    evaluation : SiteEvaluation
        Per-record D̂ and ℓ̇* of the site
    fused : FusedQuantities
        Carries ``c`` and ``estimate``
    target_site : bool, optional
        Whether the records belong to the target
    probability : float, optional
        P(S=0), required for the target
    plug_in : numpy.ndarray, optional
        μ̂(1, x) − μ̂(0, x) at the target records
    """
    values = evaluation.gradient.copy()
    if evaluation.score.shape[1]:
        values += evaluation.score @ fused.c
    if target_site:
        values += (plug_in - fused.estimate) / probability
    return values
