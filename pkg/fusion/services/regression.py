"""
Conditional-mean estimators E[response | A, X] on a fixed site sample.

``SieveRegression`` produces coefficient models that can be broadcast;
``KernelRegression`` is used for site-local centerings and by the pooled oracle.
Both expose ``fit`` (a model with ``predict(X, A)``) and ``fitted`` (predictions at
the training points).
"""

import numpy as np

from common.numerics import KernelModel, SieveBasisSpec, SieveProjector

DENSE_SMOOTHER_LIMIT = 5000


class SieveRegression:
    """Arm-interacted polynomial sieve on one site's (x, a)."""

    def __init__(self, X, A, standardizer, degree=3, ridge=1e-8):
        spec = SieveBasisSpec(np.atleast_2d(X).shape[1], degree=degree)
        self.projector = SieveProjector(spec, X, A, standardizer, ridge)

    @property
    def spec(self):
        return self.projector.spec

    @property
    def standardizer(self):
        return self.projector.standardizer

    def fit(self, responses):
        return self.projector.fit(responses)

    def fitted(self, responses):
        return self.projector.fitted_values(responses)


class KernelRegression:
    """Arm-stratified Nadaraya–Watson regression on one site's (x, a)."""

    def __init__(self, X, A, bandwidth=None):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.A = np.asarray(A, dtype=float).reshape(-1)
        self.bandwidth = bandwidth
        self._smoother = None

    def fit(self, responses):
        return KernelModel(self.X, responses, self.A, self.bandwidth)

    def fitted(self, responses):
        """Predictions at the training points; large samples skip the dense smoother."""
        responses = np.asarray(responses, dtype=float)
        if self.X.shape[0] > DENSE_SMOOTHER_LIMIT:
            return self.fit(responses).predict(self.X, self.A)
        if self._smoother is None:
            zeros = KernelModel(self.X, np.zeros(self.X.shape[0]), self.A, self.bandwidth)
            self._smoother = zeros.smoother_matrix(self.X, self.A)
        flat = responses.reshape(responses.shape[0], int(np.prod(responses.shape[1:])))
        return (self._smoother @ flat).reshape(responses.shape)
