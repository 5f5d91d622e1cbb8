"""
Outcome-shift layer: exponential-tilt weight functions w_s(z; β_s), their
normalizers W_s(x, a; β_s) and the β estimating equation solved on the target.
"""

import logging

import numpy as np

from common.exceptions import DimensionMismatchError, NonFiniteError
from common.expr import BasisVector
from common.expr.exceptions import DomainError
from common.numerics import NewtonSolver
from common.numerics.exceptions import NoConvergenceError
from fusion.enums import SourcePolicy

logger = logging.getLogger(__name__)


class WeightModel:
    """Per-source bases ξ_s and coefficients β_s of w_s = exp(β_sᵀ ξ_s).

    A source with basis ``None`` has no outcome shift (w_s ≡ 1, dim β_s = 0). The
    stacked β orders sources as given and components within a source as listed.
    """

    def __init__(self, bases, coefficients=None):
        self._bases = dict(bases)
        coefficients = coefficients or {}
        self._coefficients = {}
        for site_id, basis in self._bases.items():
            size = 0 if basis is None else len(basis)
            beta = np.asarray(coefficients.get(site_id, np.zeros(size)), dtype=float)
            beta = beta.reshape(-1)
            if beta.shape[0] != size:
                raise DimensionMismatchError(
                    f"Source {site_id}: {beta.shape[0]} coefficients "
                    f"for a basis of size {size}"
                )
            self._coefficients[site_id] = beta

    @property
    def source_ids(self):
        return list(self._bases)

    def basis(self, site_id):
        return self._bases[site_id]

    def coefficients(self, site_id):
        return self._coefficients[site_id]

    def forms(self, site_id):
        basis = self._bases[site_id]
        return [] if basis is None else basis.forms

    def dimension(self, site_id):
        return self._coefficients[site_id].shape[0]

    @property
    def total_dimension(self):
        return sum(self.dimension(site_id) for site_id in self._bases)

    @property
    def blocks(self):
        """Map source id -> slice of the stacked β."""
        blocks, start = {}, 0
        for site_id in self._bases:
            stop = start + self.dimension(site_id)
            blocks[site_id] = slice(start, stop)
            start = stop
        return blocks

    def stacked_index(self, site_id, component):
        block = self.blocks[site_id]
        if not 0 <= component < block.stop - block.start:
            raise IndexError(f"Source {site_id} has no component {component}")
        return block.start + component

    def component_of(self, index):
        for site_id, block in self.blocks.items():
            if block.start <= index < block.stop:
                return site_id, index - block.start
        raise IndexError(f"Stacked index {index} out of range")

    def stacked_coefficients(self):
        if not self._bases:
            return np.zeros(0)
        return np.concatenate([self._coefficients[site_id] for site_id in self._bases])

    def xi(self, site_id, X, A, Y):
        basis = self._bases[site_id]
        if basis is None:
            return np.zeros((np.atleast_2d(X).shape[0], 0))
        return basis.evaluate(X, A, Y)

    def xi_stacked(self, X, A, Y):
        n = np.atleast_2d(X).shape[0]
        parts = [self.xi(site_id, X, A, Y) for site_id in self._bases]
        return np.hstack(parts) if parts else np.zeros((n, 0))

    def weight(self, site_id, X, A, Y, beta=None):
        """w_s(z; β_s) at every record; ``beta`` overrides the stored coefficients."""
        if beta is None:
            beta = self._coefficients[site_id]
        else:
            beta = np.asarray(beta, dtype=float)
        n = np.atleast_2d(X).shape[0]
        if beta.shape[0] == 0 or not np.any(beta):
            return np.ones(n)
        return tilt_weights(self.xi(site_id, X, A, Y), beta)

    def with_coefficients(self, site_id, beta):
        coefficients = dict(self._coefficients)
        coefficients[site_id] = np.asarray(beta, dtype=float)
        return WeightModel(self._bases, coefficients)

    def without(self, site_ids):
        keep = [site_id for site_id in self._bases if site_id not in set(site_ids)]
        return WeightModel(
            {site_id: self._bases[site_id] for site_id in keep},
            {site_id: self._coefficients[site_id] for site_id in keep},
        )

    def to_payload(self):
        return [
            {
                "site_id": site_id,
                "forms": self.forms(site_id),
                "beta": self._coefficients[site_id].tolist(),
            }
            for site_id in self._bases
        ]

    @classmethod
    def from_payload(cls, payload, dimension):
        bases, coefficients = {}, {}
        for entry in payload:
            forms = entry["forms"]
            basis = BasisVector.parse(forms, dimension) if forms else None
            bases[entry["site_id"]] = basis
            coefficients[entry["site_id"]] = entry["beta"]
        return cls(bases, coefficients)


def tilt_weights(xi, beta):
    with np.errstate(over="ignore"):
        weights = np.exp(xi @ beta)
    if not np.all(np.isfinite(weights)):
        raise NonFiniteError("Weight function overflowed; beta is out of range")
    return weights


class NormalizerModel:
    """Ŵ_s(x, a) = max(E[w_s | a, x, S=0], floor); identically 1 at β_s = 0."""

    __slots__ = ("site_id", "model", "floor")

    def __init__(self, site_id, model=None, floor=1e-6):
        self.site_id = site_id
        self.model = model
        self.floor = float(floor)

    @property
    def is_identity(self):
        return self.model is None

    def predict(self, X, A):
        n = np.atleast_2d(X).shape[0]
        if self.model is None:
            return np.ones(n)
        return np.maximum(np.asarray(self.model.predict(X, A)).reshape(n), self.floor)


def estimate_normalizer(target, weights, site_id, beta, regression, floor=1e-6):
    """Regress w_s(zᵢ; β_s) on (xᵢ, aᵢ) over the target sample.

    Parameters
    ----------
    target : SiteDataset
        Target site data
    weights : WeightModel
        Provides ξ_s for ``site_id``
    site_id : str
        Source whose normalizer is estimated
    beta : array-like
        Coefficients β_s at which to evaluate w_s
    regression : SieveRegression or KernelRegression
        Conditional-mean estimator on the target sample
    floor : float, optional
        Positivity floor δ, default 1e-6

    Returns
    -------
    NormalizerModel
        Identity model when β_s = 0, otherwise the fitted regression

    Raises
    ------
    DomainError
        If ξ_s cannot be evaluated on a target record
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] == 0 or not np.any(beta):
        return NormalizerModel(site_id, None, floor)
    values = weights.weight(site_id, target.X, target.A, target.Y, beta)
    return NormalizerModel(site_id, regression.fit(values), floor)


class SourceShiftResult:
    """Outcome of one source's β solve, with diagnostics for the report."""

    def __init__(
        self,
        site_id,
        beta=None,
        normalizer=None,
        iterations=0,
        residual=None,
        overlap_ratio=None,
        error=None,
    ):
        self.site_id = site_id
        self.beta = beta
        self.normalizer = normalizer
        self.iterations = iterations
        self.residual = residual
        self.overlap_ratio = overlap_ratio
        self.error = error

    @property
    def converged(self):
        return self.error is None

    def to_diagnostics(self):
        return {
            "beta": None if self.beta is None else self.beta.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
            "overlap_ratio": self.overlap_ratio,
            "error": self.error,
        }


class OutcomeShiftSolver:
    """Solves the β estimating equation of every source on the target sample.

    For each source the system block-separates:
    ``ξ̄_s = (1/n₀) Σ λ̂_s(xᵢ, aᵢ) · w_s(zᵢ; β_s) / Ŵ_s(xᵢ, aᵢ; β_s) · ξ_s(zᵢ)``,
    with Ŵ_s re-fitted at every evaluation.
    """

    def __init__(self, target, lambdas, regression, config, solver_factory=NewtonSolver):
        self.target = target
        self.lambdas = lambdas
        self.regression = regression
        self.config = config
        self.solver_factory = solver_factory
        self._lambda_cache = {}

    def _lambda(self, site_id):
        if site_id not in self._lambda_cache:
            self._lambda_cache[site_id] = self.lambdas[site_id].predict(
                self.target.X, self.target.A
            )
        return self._lambda_cache[site_id]

    def _normalized_weights(self, xi, beta):
        if beta.shape[0] == 0 or not np.any(beta):
            return np.ones(self.target.n)
        weights = tilt_weights(xi, beta)
        fitted = self.regression.fitted(weights)
        return weights / np.maximum(fitted, self.config.normalizer_floor)

    def moment_residual(self, site_id, xi, xi_mean, beta):
        """Left minus right side of the estimating equation at ``beta``."""
        beta = np.asarray(beta, dtype=float)
        wstar = self._normalized_weights(xi, beta)
        reweighted = (self._lambda(site_id) * wstar) @ xi / self.target.n
        return reweighted - xi_mean

    def overlap_ratio(self, site_id, xi, beta):
        product = self._lambda(site_id) * self._normalized_weights(xi, np.asarray(beta))
        return float(product.max() / product.min())

    def solve_source(self, site_id, basis, xi_mean):
        """Solve one source's block from β_s = 0."""
        xi = basis.evaluate(self.target.X, self.target.A, self.target.Y)
        xi_mean = np.asarray(xi_mean, dtype=float).reshape(-1)
        if xi_mean.shape[0] != xi.shape[1]:
            raise DimensionMismatchError(
                f"Source {site_id}: {xi_mean.shape[0]} basis means "
                f"for {xi.shape[1]} forms"
            )
        solver = self.solver_factory()
        beta = solver.solve(
            lambda b: self.moment_residual(site_id, xi, xi_mean, b), np.zeros(xi.shape[1])
        )
        return beta, solver.iterations, solver.residual, xi

    def likelihood_score(self, xi_target, xi_source_mean, smoother, beta):
        """Conditional-likelihood score of β_s averaged over the source records.

        ``smoother`` maps target responses to E[· | a, x, S=0] at the source records.
        """
        weights = tilt_weights(xi_target, np.asarray(beta, dtype=float))
        numerator = smoother @ (weights[:, None] * xi_target)
        denominator = np.maximum(smoother @ weights, self.config.normalizer_floor)
        return xi_source_mean - (numerator / denominator[:, None]).mean(axis=0)

    def solve_source_likelihood(self, site_id, basis, source, smoother):
        """Solve one source's block by the conditional-likelihood score (pooled data)."""
        xi = basis.evaluate(self.target.X, self.target.A, self.target.Y)
        xi_source_mean = basis.evaluate(source.X, source.A, source.Y).mean(axis=0)
        solver = self.solver_factory()
        beta = solver.solve(
            lambda b: self.likelihood_score(xi, xi_source_mean, smoother, b),
            np.zeros(xi.shape[1]),
        )
        return beta, solver.iterations, solver.residual, xi

    def solve(self, round1, bases, likelihood_inputs=None):
        """Solve every source and apply the source policy to failures.

        Parameters
        ----------
        round1 : list
            Round-1 summaries with ``site_id``, ``n`` and ``xi_mean``
        bases : dict
            Source id -> BasisVector (``None`` for sources without outcome shift)
        likelihood_inputs : dict, optional
            Source id -> ``(source_dataset, smoother)``; switches those sources to the
            conditional-likelihood score (individual-level access only)

        Returns
        -------
        dict
            Source id -> ``SourceShiftResult`` (failed sources carry ``error``)

        Raises
        ------
        NoConvergenceError
            When a source fails and the policy is ``abort``
        """
        likelihood_inputs = likelihood_inputs or {}
        results = {}
        for summary in round1:
            site_id = summary.site_id
            basis = bases.get(site_id)
            if basis is None:
                lam = self._lambda(site_id)
                results[site_id] = SourceShiftResult(
                    site_id,
                    np.zeros(0),
                    NormalizerModel(site_id, None, self.config.normalizer_floor),
                    overlap_ratio=float(lam.max() / lam.min()),
                )
                continue
            try:
                if site_id in likelihood_inputs:
                    source, smoother = likelihood_inputs[site_id]
                    beta, iterations, residual, xi = self.solve_source_likelihood(
                        site_id, basis, source, smoother
                    )
                else:
                    beta, iterations, residual, xi = self.solve_source(
                        site_id, basis, summary.xi_mean
                    )
            except (NoConvergenceError, DomainError, NonFiniteError) as exc:
                if self.config.source_policy == SourcePolicy.ABORT:
                    raise
                logger.warning(f"Excluding source {site_id}: beta solve failed ({exc})")
                results[site_id] = SourceShiftResult(site_id, error=str(exc))
                continue

            weights = WeightModel({site_id: basis}, {site_id: beta})
            normalizer = estimate_normalizer(
                self.target,
                weights,
                site_id,
                beta,
                self.regression,
                self.config.normalizer_floor,
            )
            ratio = self.overlap_ratio(site_id, xi, beta)
            if ratio > self.config.overlap_warn_ratio:
                logger.warning(
                    f"Source {site_id}: overlap ratio {ratio:.1f} exceeds "
                    f"{self.config.overlap_warn_ratio:g}"
                )
            logger.info(
                f"Source {site_id}: beta={np.round(beta, 4).tolist()} after "
                f"{iterations} iterations (residual {residual:.2e})"
            )
            results[site_id] = SourceShiftResult(
                site_id, beta, normalizer, iterations, residual, ratio
            )
        return results


def solve_beta(
    target, round1, lambdas, regression, config, bases=None, likelihood_inputs=None
):
    """Estimate β̂ for every source and assemble the weight model of included sources.

    Parameters
    ----------
    target : SiteDataset
        Target site data
    round1 : list
        Round-1 summaries (``site_id``, ``n``, ``xi_forms``, ``xi_mean``)
    lambdas : dict
        Source id -> CovariateShiftModel
    regression : SieveRegression or KernelRegression
        Normalizer estimator on the target sample
    config : EstimationConfig
        Floors, overlap threshold and source policy
    bases : dict, optional
        Source id -> BasisVector or ``None``; parsed from ``xi_forms`` when omitted

    Returns
    -------
    tuple
        ``(WeightModel, normalizers, results)`` where ``normalizers`` maps included
        source ids to ``NormalizerModel`` and ``results`` holds every
        ``SourceShiftResult`` including failures
    """
    if bases is None:
        bases = {
            summary.site_id: BasisVector.parse(summary.xi_forms, target.dimension)
            if summary.xi_forms
            else None
            for summary in round1
        }
    solver = OutcomeShiftSolver(target, lambdas, regression, config)
    results = solver.solve(round1, bases, likelihood_inputs)
    included = [site_id for site_id, result in results.items() if result.converged]
    weights = WeightModel(
        {site_id: bases.get(site_id) for site_id in included},
        {site_id: results[site_id].beta for site_id in included},
    )
    normalizers = {site_id: results[site_id].normalizer for site_id in included}
    return weights, normalizers, results
