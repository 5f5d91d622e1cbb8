"""
Nadaraya–Watson regression with a product Gaussian kernel, stratified by arm.

Used for the site-local centerings E[· | A, X, S = s], which never leave the site
and therefore need not be representable by coefficients.
"""

import numpy as np

from common.exceptions import DimensionMismatchError
from common.numerics.exceptions import EmptyStratumError
from common.numerics.linalg import check_finite

QUERY_CHUNK = 512


def silverman_bandwidth(X):
    """Per-covariate rule-of-thumb bandwidth ``1.06·σ̂·n^(-1/5)``.

    Covariates without spread get bandwidth 1.0; their kernel factor is then the
    same for every training point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    sigma = X.std(axis=0, ddof=1) if n > 1 else np.zeros(X.shape[1])
    bandwidth = 1.06 * sigma * n ** (-0.2)
    return np.where(bandwidth > 0, bandwidth, 1.0)


class KernelModel:
    """Training data and bandwidths for arm-stratified kernel regression.

    Parameters
    ----------
    X : numpy.ndarray
        Training covariates, shape ``(n, d)``
    responses : numpy.ndarray
        Responses, shape ``(n,)`` or ``(n, ...)``
    A : numpy.ndarray, optional
        Arm of every training point; ``None`` pools all points in one stratum
    bandwidth : float or array-like, optional
        Fixed bandwidth (scalar or per covariate) overriding Silverman's rule
    """

    def __init__(self, X, responses, A=None, bandwidth=None):
        X = check_finite(np.atleast_2d(X), "kernel covariates")
        responses = check_finite(responses, "kernel responses")
        if responses.shape[0] != X.shape[0]:
            raise DimensionMismatchError(
                f"Kernel responses have {responses.shape[0]} rows, "
                f"covariates {X.shape[0]}"
            )
        self.dimension = X.shape[1]
        self.output_shape = responses.shape[1:]
        strata = np.zeros(X.shape[0]) if A is None else np.asarray(A, dtype=float)
        self.stratified = A is not None
        self.n_train = X.shape[0]
        self._strata = {}
        self._indices = {}
        for value in np.unique(strata):
            mask = strata == value
            self._indices[float(value)] = np.flatnonzero(mask)
            points = X[mask]
            if bandwidth is None:
                h = silverman_bandwidth(points)
            else:
                h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (self.dimension,))
            if np.any(h <= 0):
                raise ValueError("Kernel bandwidths must be positive")
            width = int(np.prod(self.output_shape))
            flat = responses[mask].reshape(points.shape[0], width)
            self._strata[float(value)] = (points, flat, np.array(h, dtype=float))

    def bandwidth(self, stratum=0.0):
        return self._strata[float(stratum)][2]

    def stratum_responses(self, stratum=0.0):
        return self._strata[float(stratum)][1]

    def _stratum(self, stratum):
        try:
            return self._strata[float(stratum)]
        except KeyError:
            raise EmptyStratumError(f"No training points in arm stratum {stratum:g}")

    @staticmethod
    def _weights(block, points, h):
        scaled = (block[:, None, :] - points[None, :, :]) / h
        log_weights = -0.5 * np.sum(scaled**2, axis=2)
        log_weights -= log_weights.max(axis=1, keepdims=True)
        weights = np.exp(log_weights)
        return weights / weights.sum(axis=1, keepdims=True)

    def _regress(self, queries, stratum):
        points, responses, h = self._stratum(stratum)
        estimates = np.empty((queries.shape[0], responses.shape[1]))
        for start in range(0, queries.shape[0], QUERY_CHUNK):
            block = queries[start : start + QUERY_CHUNK]
            weights = self._weights(block, points, h)
            estimates[start : start + QUERY_CHUNK] = weights @ responses
        return estimates

    def smoother_matrix(self, X, A=None):
        """Dense weight matrix S with ``predict(X, A) == S @ responses``.

        Rows are queries, columns are training points in their original order;
        weights outside the query's stratum are zero.
        """
        X = check_finite(np.atleast_2d(X), "kernel queries")
        arms = np.zeros(X.shape[0]) if not self.stratified else np.asarray(A, dtype=float)
        smoother = np.zeros((X.shape[0], self.n_train))
        for value in np.unique(arms):
            rows = np.flatnonzero(arms == value)
            points, _, h = self._stratum(value)
            columns = self._indices[float(value)]
            smoother[np.ix_(rows, columns)] = self._weights(X[rows], points, h)
        return smoother

    def predict(self, X, A=None):
        """Kernel estimates at every query row; shape ``(m,) + output_shape``."""
        X = check_finite(np.atleast_2d(X), "kernel queries")
        if X.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"Kernel model expects {self.dimension} covariates, got {X.shape[1]}"
            )
        n_out = int(np.prod(self.output_shape)) if self.output_shape else 1
        estimates = np.empty((X.shape[0], n_out))
        if not self.stratified:
            estimates[:] = self._regress(X, 0.0)
        else:
            if A is None:
                raise DimensionMismatchError("Stratified kernel model needs query arms")
            A = np.asarray(A, dtype=float).reshape(-1)
            for value in np.unique(A):
                mask = A == value
                estimates[mask] = self._regress(X[mask], value)
        return estimates.reshape((X.shape[0],) + self.output_shape)


def kernel_regress(model, x, a=None):
    """Nadaraya–Watson estimate at a single query.

    Parameters
    ----------
    model : KernelModel
        Training data and bandwidths
    x : array-like
        Query covariates of length d
    a : int, optional
        Query arm for stratified models

    Returns
    -------
    float or numpy.ndarray
        Convex combination of the stratum's training responses

    Raises
    ------
    EmptyStratumError
        If the query arm has no training points
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    arms = None if a is None else np.array([a], dtype=float)
    estimate = model.predict(x, arms)[0]
    return float(estimate) if np.ndim(estimate) == 0 else estimate
