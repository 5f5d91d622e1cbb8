"""
Sieve least-squares regression on polynomial bases in standardized covariates.

Every object that the target site broadcasts is a ``SieveModel``: a basis
specification, the standardization constants and a coefficient matrix. Sites that
receive the payload rebuild the exact same design and therefore the exact same
predictions.
"""

import itertools

import numpy as np

from common.exceptions import DimensionMismatchError
from common.numerics.linalg import RidgeSolver, check_finite

DEFAULT_DEGREE = 3
DEFAULT_RIDGE = 1e-8


class Standardizer:
    """Affine map ``(x − center) / scale`` applied before basis expansion."""

    __slots__ = ("center", "scale")

    def __init__(self, center, scale):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        if center.shape != scale.shape:
            raise DimensionMismatchError("Standardizer center and scale differ in length")
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
            raise ValueError("Standardizer scales must be positive and finite")
        self.center = center
        self.scale = scale

    @classmethod
    def from_data(cls, X):
        """Center/scale from the columns of ``X``; constant columns get scale 1."""
        X = check_finite(np.atleast_2d(X), "covariates")
        center = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(center, scale)

    @classmethod
    def identity(cls, dimension):
        return cls(np.zeros(dimension), np.ones(dimension))

    @property
    def dimension(self):
        return self.center.shape[0]

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dimension:
            raise DimensionMismatchError(
                f"Expected {self.dimension} covariates, got {X.shape[-1]}"
            )
        return (X - self.center) / self.scale

    def to_payload(self):
        return {"center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_payload(cls, payload):
        return cls(payload["center"], payload["scale"])

    def __eq__(self, other):
        return (
            isinstance(other, Standardizer)
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.scale, other.scale)
        )


class SieveBasisSpec:
    """Polynomial sieve: per-covariate powers up to ``degree``, optional pairwise
    products, and either full interaction with the arm or an additive arm column.
    """

    __slots__ = ("dimension", "degree", "arm_interaction", "pairwise")

    def __init__(
        self, dimension, degree=DEFAULT_DEGREE, arm_interaction=True, pairwise=False
    ):
        if degree < 0:
            raise ValueError(f"Sieve degree must be >= 0, got {degree}")
        if dimension < 1:
            raise ValueError(f"Covariate dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.degree = int(degree)
        self.arm_interaction = bool(arm_interaction)
        self.pairwise = bool(pairwise)

    @property
    def base_terms(self):
        """Names of the arm-free terms in design order."""
        terms = ["1"]
        for j in range(1, self.dimension + 1):
            terms.extend(f"x{j}^{power}" for power in range(1, self.degree + 1))
        if self.pairwise and self.degree >= 1:
            terms.extend(
                f"x{j}*x{m}"
                for j, m in itertools.combinations(range(1, self.dimension + 1), 2)
            )
        return terms

    @property
    def term_names(self):
        base = self.base_terms
        if self.arm_interaction:
            return [f"(1-a)*{term}" for term in base] + [f"a*{term}" for term in base]
        return base + ["a"]

    @property
    def n_terms(self):
        return len(self.term_names)

    def _base_matrix(self, Z):
        columns = [np.ones(Z.shape[0])]
        for j in range(self.dimension):
            columns.extend(Z[:, j] ** power for power in range(1, self.degree + 1))
        if self.pairwise and self.degree >= 1:
            columns.extend(
                Z[:, j] * Z[:, m]
                for j, m in itertools.combinations(range(self.dimension), 2)
            )
        return np.column_stack(columns)

    def design(self, Z, A):
        """Design matrix for standardized covariates ``Z`` (n, d) and arms ``A`` (n,)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        A = np.asarray(A, dtype=float).reshape(-1)
        if Z.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"Sieve spec expects {self.dimension} covariates, got {Z.shape[1]}"
            )
        if Z.shape[0] != A.shape[0]:
            raise DimensionMismatchError(
                f"Covariates have {Z.shape[0]} rows but arms have {A.shape[0]}"
            )
        base = self._base_matrix(Z)
        if self.arm_interaction:
            return np.hstack([(1.0 - A)[:, None] * base, A[:, None] * base])
        return np.hstack([base, A[:, None]])

    def constant_coefficients(self):
        """Coefficient vector whose prediction is exactly 1 at every point."""
        coefficients = np.zeros(self.n_terms)
        coefficients[0] = 1.0
        if self.arm_interaction:
            coefficients[len(self.base_terms)] = 1.0
        return coefficients

    def to_payload(self):
        return {
            "dimension": self.dimension,
            "degree": self.degree,
            "arm_interaction": self.arm_interaction,
            "pairwise": self.pairwise,
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(**payload)

    def __eq__(self, other):
        if not isinstance(other, SieveBasisSpec):
            return False
        return self.to_payload() == other.to_payload()

    def __repr__(self):
        return f"SieveBasisSpec({self.to_payload()})"


class SieveModel:
    """Fitted sieve regression: E[response | a, x] ≈ design(x, a) @ coefficients."""

    __slots__ = ("spec", "standardizer", "coefficients", "ridge")

    def __init__(self, spec, standardizer, coefficients, ridge=DEFAULT_RIDGE):
        coefficients = check_finite(coefficients, "sieve coefficients")
        if coefficients.shape[0] != spec.n_terms:
            raise DimensionMismatchError(
                f"Expected {spec.n_terms} coefficient rows, got {coefficients.shape[0]}"
            )
        if standardizer.dimension != spec.dimension:
            raise DimensionMismatchError("Standardizer and sieve spec dimensions differ")
        self.spec = spec
        self.standardizer = standardizer
        self.coefficients = coefficients
        self.ridge = float(ridge)

    @classmethod
    def constant(cls, spec, standardizer, value):
        """Model predicting ``value`` (scalar or vector) everywhere."""
        value = np.asarray(value, dtype=float)
        coefficients = np.multiply.outer(spec.constant_coefficients(), value)
        return cls(spec, standardizer, coefficients)

    @property
    def output_shape(self):
        return self.coefficients.shape[1:]

    def design(self, X, A):
        return self.spec.design(self.standardizer.transform(np.atleast_2d(X)), A)

    def predict(self, X, A):
        """Predictions of shape ``(n,) + output_shape``."""
        design = self.design(X, A)
        return np.tensordot(design, self.coefficients, axes=(1, 0))

    def to_payload(self):
        return {
            "spec": self.spec.to_payload(),
            "standardizer": self.standardizer.to_payload(),
            "coefficients": self.coefficients.tolist(),
            "output_shape": list(self.output_shape),
            "ridge": self.ridge,
        }

    @classmethod
    def from_payload(cls, payload):
        spec = SieveBasisSpec.from_payload(payload["spec"])
        return cls(
            spec,
            Standardizer.from_payload(payload["standardizer"]),
            np.asarray(payload["coefficients"], dtype=float).reshape(
                (spec.n_terms,) + tuple(payload.get("output_shape", ()))
            ),
            payload["ridge"],
        )


class SieveProjector:
    """Sieve regressions that share one set of training inputs.

    The design and its ridge factorization are computed once; ``fit`` then costs a
    triangular solve per call, which keeps the nested normalizer re-fits inside the
    β solver cheap.
    """

    def __init__(self, spec, X, A, standardizer=None, ridge=DEFAULT_RIDGE):
        X = check_finite(np.atleast_2d(X), "covariates")
        if X.shape[0] < 1:
            raise DimensionMismatchError(
                "Sieve regression needs at least one observation"
            )
        self.spec = spec
        self.standardizer = standardizer or Standardizer.from_data(X)
        self.ridge = float(ridge)
        self.X = X
        self.A = np.asarray(A, dtype=float).reshape(-1)
        self.design = spec.design(self.standardizer.transform(X), self.A)
        self._solver = RidgeSolver(self.design, self.ridge)
        self._unit = spec.constant_coefficients()

    @property
    def n_rows(self):
        return self.design.shape[0]

    def coefficients(self, responses):
        responses = check_finite(responses, "responses")
        if responses.shape[0] != self.n_rows:
            raise DimensionMismatchError(
                f"Responses have {responses.shape[0]} rows, expected {self.n_rows}"
            )
        flat = responses.reshape(self.n_rows, int(np.prod(responses.shape[1:])))
        coefficients = np.empty((self.spec.n_terms, flat.shape[1]))
        constant = np.all(flat == flat[0], axis=0)
        # Constant responses are represented exactly by the intercept columns
        coefficients[:, constant] = np.multiply.outer(self._unit, flat[0, constant])
        if not np.all(constant):
            coefficients[:, ~constant] = self._solver.solve(flat[:, ~constant])
        return coefficients.reshape((self.spec.n_terms,) + responses.shape[1:])

    def fit(self, responses):
        """Fit one model to ``responses`` of shape ``(n,)`` or ``(n, ...)``."""
        return SieveModel(
            self.spec, self.standardizer, self.coefficients(responses), self.ridge
        )

    def fitted_values(self, responses):
        return np.tensordot(self.design, self.coefficients(responses), axes=(1, 0))


def sieve_fit(spec, X, A, responses, standardizer=None, ridge=DEFAULT_RIDGE):
    """Ridge-penalized sieve least squares.

    Parameters
    ----------
    spec : SieveBasisSpec
        Basis specification
    X : numpy.ndarray
        Covariates of shape ``(n, d)``
    A : numpy.ndarray
        Arms of shape ``(n,)``
    responses : numpy.ndarray
        Responses of shape ``(n,)`` or ``(n, q)``
    standardizer : Standardizer, optional
        Covariate standardization; estimated from ``X`` when omitted
    ridge : float, optional
        Penalty ε on the squared coefficient norm, default 1e-8

    Returns
    -------
    SieveModel
        Fitted model

    Raises
    ------
    DimensionMismatchError
        If row counts or covariate dimensions disagree
    NonFiniteError
        If inputs contain inf or nan
    """
    return SieveProjector(spec, X, A, standardizer, ridge).fit(responses)


def sieve_predict(model, x, a):
    """Prediction at a single query ``(x, a)``; returns a vector of length q."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return np.atleast_1d(model.predict(x, np.array([a]))[0])
