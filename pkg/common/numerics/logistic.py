"""
Main-terms logistic regression fitted by iteratively reweighted least squares.
"""

import logging

import numpy as np
from scipy.special import expit

from common.exceptions import DimensionMismatchError
from common.numerics.exceptions import SeparationError
from common.numerics.linalg import check_finite
from common.numerics.sieve import Standardizer

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 100
GRADIENT_TOL = 1e-10
COEFFICIENT_BOUND = 30.0


def logistic_fit(design, labels, max_iter=MAX_ITERATIONS, tol=GRADIENT_TOL):
    """Maximum-likelihood logistic coefficients via IRLS.

    Parameters
    ----------
    design : numpy.ndarray
        Design matrix of shape ``(n, p)``, intercept column included by the caller
    labels : numpy.ndarray
        Binary labels of shape ``(n,)``
    max_iter : int, optional
        Iteration cap, default 100
    tol : float, optional
        Sup-norm tolerance on the mean log-likelihood gradient, default 1e-10

    Returns
    -------
    numpy.ndarray
        Coefficients of length p

    Raises
    ------
    SeparationError
        If a coefficient exceeds 30 in absolute value or only one class is present
    """
    design = check_finite(design, "logistic design")
    labels = check_finite(labels, "logistic labels").reshape(-1)
    if design.shape[0] != labels.shape[0]:
        raise DimensionMismatchError(
            f"Design has {design.shape[0]} rows but labels have {labels.shape[0]}"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("Logistic labels must be 0 or 1")
    if labels.min() == labels.max():
        raise SeparationError(
            "Logistic regression needs both classes present",
            details={"label": float(labels[0])},
        )

    n = labels.shape[0]
    coefficients = np.zeros(design.shape[1])
    for iteration in range(1, max_iter + 1):
        probabilities = expit(design @ coefficients)
        gradient = design.T @ (labels - probabilities) / n
        if np.max(np.abs(gradient)) < tol:
            break
        weights = probabilities * (1.0 - probabilities)
        hessian = (design * weights[:, None]).T @ design / n
        step = np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        coefficients = coefficients + step
        if np.max(np.abs(coefficients)) > COEFFICIENT_BOUND:
            raise SeparationError(
                f"Logistic coefficients diverged after {iteration} iterations",
                details={"coefficients": coefficients.tolist()},
            )
    else:
        logger.warning(
            f"IRLS stopped after {max_iter} iterations with gradient "
            f"{np.max(np.abs(gradient)):.3e}"
        )
    return coefficients


class LogisticModel:
    """Main-terms logistic model P(label = 1 | x) on standardized covariates."""

    __slots__ = ("coefficients", "standardizer")

    def __init__(self, coefficients, standardizer):
        coefficients = check_finite(coefficients, "logistic coefficients").reshape(-1)
        if coefficients.shape[0] != standardizer.dimension + 1:
            raise DimensionMismatchError(
                f"Expected {standardizer.dimension + 1} coefficients, "
                f"got {coefficients.shape[0]}"
            )
        self.coefficients = coefficients
        self.standardizer = standardizer

    @staticmethod
    def design(Z):
        return np.hstack([np.ones((Z.shape[0], 1)), Z])

    @classmethod
    def fit(cls, X, labels, standardizer=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        standardizer = standardizer or Standardizer.from_data(X)
        coefficients = logistic_fit(cls.design(standardizer.transform(X)), labels)
        return cls(coefficients, standardizer)

    def linear_predictor(self, X):
        Z = self.standardizer.transform(np.atleast_2d(X))
        return self.design(Z) @ self.coefficients

    def predict_proba(self, X):
        return expit(self.linear_predictor(X))

    def to_payload(self):
        return {
            "coefficients": self.coefficients.tolist(),
            "standardizer": self.standardizer.to_payload(),
        }

    @classmethod
    def from_payload(cls, payload):
        standardizer = Standardizer.from_payload(payload["standardizer"])
        return cls(payload["coefficients"], standardizer)
