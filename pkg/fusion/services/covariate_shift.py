"""
Covariate/treatment density ratios λ_s(x, a) by exponential tilting of the target.
"""

import itertools
import logging

import numpy as np
from scipy.special import logsumexp

from common.exceptions import DimensionMismatchError
from common.numerics import NewtonSolver, logistic_fit

logger = logging.getLogger(__name__)


class CovariateFeatureSpec:
    """Shared feature basis φ(x, a): intercept-free powers of x up to ``degree``
    (with pairwise products at degree ≥ 2), the treatment a and the a·x_j terms.
    """

    __slots__ = ("dimension", "degree", "treatment")

    def __init__(self, dimension, degree=2, treatment=True):
        if degree < 1:
            raise ValueError("Covariate feature degree must be >= 1")
        self.dimension = int(dimension)
        self.degree = int(degree)
        self.treatment = bool(treatment)

    @property
    def names(self):
        names = []
        for j in range(1, self.dimension + 1):
            names.extend(
                f"x{j}" if power == 1 else f"x{j}^{power}"
                for power in range(1, self.degree + 1)
            )
        if self.degree >= 2:
            names.extend(
                f"x{j}*x{m}"
                for j, m in itertools.combinations(range(1, self.dimension + 1), 2)
            )
        if self.treatment:
            names.append("a")
            names.extend(f"a*x{j}" for j in range(1, self.dimension + 1))
        return names

    @property
    def n_features(self):
        return len(self.names)

    def features(self, X, A):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        A = np.asarray(A, dtype=float).reshape(-1)
        if X.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"Feature spec expects {self.dimension} covariates, got {X.shape[1]}"
            )
        columns = []
        for j in range(self.dimension):
            columns.extend(X[:, j] ** power for power in range(1, self.degree + 1))
        if self.degree >= 2:
            pairs = itertools.combinations(range(self.dimension), 2)
            columns.extend(X[:, j] * X[:, m] for j, m in pairs)
        if self.treatment:
            columns.append(A)
            columns.extend(A * X[:, j] for j in range(self.dimension))
        return np.column_stack(columns)

    def moments(self, X, A):
        """Exact empirical means of φ over the given records."""
        return self.features(X, A).mean(axis=0)

    def to_payload(self):
        return {
            "dimension": self.dimension,
            "degree": self.degree,
            "treatment": self.treatment,
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(**payload)

    def __eq__(self, other):
        return (
            isinstance(other, CovariateFeatureSpec)
            and self.to_payload() == other.to_payload()
        )


def _feature_scaling(features):
    center = features.mean(axis=0)
    scale = features.std(axis=0)
    return center, np.where(scale > 0, scale, 1.0)


class CovariateShiftModel:
    """λ_s(x, a) = exp(γᵀ φ̃(x, a) − log_normalizer), φ̃ the target-standardized features.

    The log-normalizer makes the target-sample mean of λ equal to one.
    """

    __slots__ = ("feature_spec", "gamma", "log_normalizer", "center", "scale", "n_source")

    def __init__(self, feature_spec, gamma, log_normalizer, center, scale, n_source=None):
        gamma = np.asarray(gamma, dtype=float).reshape(-1)
        if gamma.shape[0] != feature_spec.n_features:
            raise DimensionMismatchError(
                f"Expected {feature_spec.n_features} tilt coefficients, "
                f"got {gamma.shape[0]}"
            )
        self.feature_spec = feature_spec
        self.gamma = gamma
        self.log_normalizer = float(log_normalizer)
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.scale = np.asarray(scale, dtype=float).reshape(-1)
        self.n_source = n_source

    @classmethod
    def identity(cls, feature_spec):
        """λ ≡ 1 (the target's own ratio)."""
        n_features = feature_spec.n_features
        zeros = np.zeros(n_features)
        return cls(feature_spec, zeros, 0.0, zeros.copy(), np.ones(n_features))

    def standardized_features(self, X, A):
        return (self.feature_spec.features(X, A) - self.center) / self.scale

    def log_lambda(self, X, A):
        return self.standardized_features(X, A) @ self.gamma - self.log_normalizer

    def predict(self, X, A):
        return np.exp(self.log_lambda(X, A))

    def to_payload(self):
        return {
            "feature_spec": self.feature_spec.to_payload(),
            "gamma": self.gamma.tolist(),
            "log_normalizer": self.log_normalizer,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            CovariateFeatureSpec.from_payload(payload["feature_spec"]),
            payload["gamma"],
            payload["log_normalizer"],
            payload["center"],
            payload["scale"],
        )


def evaluate_lambda(model, x, a):
    """λ̂_s at a single query ``(x, a)``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(model.predict(x, np.array([a]))[0])


def fit_covariate_tilt(target, source_moments, n_source, feature_spec, solver=None):
    """Exponential tilt of the target that reproduces a source's feature means.

    Solves ``(1/n₀) Σ λ(xᵢ, aᵢ; γ) φ(xᵢ, aᵢ) = φ̄_s`` from γ = 0 with the analytic
    Jacobian (the λ-weighted covariance of the features).

    Parameters
    ----------
    target : SiteDataset
        Target site data
    source_moments : array-like
        Source feature means φ̄_s
    n_source : int
        Source sample size, kept for diagnostics
    feature_spec : CovariateFeatureSpec
        Protocol-wide feature basis
    solver : NewtonSolver, optional
        Solver instance; a default one is created when omitted

    Returns
    -------
    CovariateShiftModel
        Fitted tilt

    Raises
    ------
    NoConvergenceError
        When the source moments cannot be reached from the target's support
    """
    solver = solver or NewtonSolver()
    features = feature_spec.features(target.X, target.A)
    center, scale = _feature_scaling(features)
    standardized = (features - center) / scale
    goal = (np.asarray(source_moments, dtype=float).reshape(-1) - center) / scale
    if goal.shape[0] != standardized.shape[1]:
        raise DimensionMismatchError(
            f"Source reported {goal.shape[0]} moments, feature basis has "
            f"{standardized.shape[1]}"
        )

    def tilt_weights(gamma):
        scores = standardized @ gamma
        return np.exp(scores - logsumexp(scores))

    def residual(gamma):
        return standardized.T @ tilt_weights(gamma) - goal

    def jacobian(gamma):
        weights = tilt_weights(gamma)
        mean = standardized.T @ weights
        return (standardized * weights[:, None]).T @ standardized - np.outer(mean, mean)

    gamma = solver.solve(residual, np.zeros(standardized.shape[1]), jacobian=jacobian)
    log_normalizer = logsumexp(standardized @ gamma) - np.log(target.n)
    logger.debug(
        f"Covariate tilt converged in {solver.iterations} iterations "
        f"(residual {solver.residual:.2e})"
    )
    return CovariateShiftModel(
        feature_spec, gamma, log_normalizer, center, scale, n_source
    )


def fit_covariate_classifier(target, source, feature_spec):
    """λ_s from individual records by logistic classification of site membership.

    The log-odds of S = s versus S = 0 on the standardized features are linear, so the
    fitted ratio stays in the exponential-tilt family; it is self-normalized on the
    target sample. Requires individual-level access to the source.
    """
    target_features = feature_spec.features(target.X, target.A)
    center, scale = _feature_scaling(target_features)
    stacked = np.vstack([target_features, feature_spec.features(source.X, source.A)])
    standardized = (stacked - center) / scale
    labels = np.concatenate([np.zeros(target.n), np.ones(source.n)])
    design = np.hstack([np.ones((standardized.shape[0], 1)), standardized])
    coefficients = logistic_fit(design, labels)
    gamma = coefficients[1:]
    log_normalizer = logsumexp(standardized[: target.n] @ gamma) - np.log(target.n)
    return CovariateShiftModel(
        feature_spec, gamma, log_normalizer, center, scale, source.n
    )
