"""
Numerical kernel exceptions.
"""

from common.exceptions import EcoAteError


class NumericsError(EcoAteError):
    """Base exception for regression, inversion and root-finding failures."""

    pass


class SeparationError(NumericsError):
    """Logistic coefficients diverged; the classes are (quasi-)separated."""

    pass


class EmptyStratumError(NumericsError):
    """Kernel regression was queried in an arm stratum with no training points."""

    pass


class NoConvergenceError(NumericsError):
    """Root finding stopped without meeting the tolerance."""

    def __init__(self, message, best=None, residual=None, iterations=None):
        """Initialize convergence failure.

        Parameters
        ----------
        message : str
            Human-readable error message
        best : numpy.ndarray, optional
            Iterate with the smallest residual norm seen
        residual : float, optional
            Sup-norm of the residual at ``best``
        iterations : int, optional
            Newton iterations performed
        """
        super().__init__(
            message,
            details={"residual": residual, "iterations": iterations},
        )
        self.best = best
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(NoConvergenceError):
    """Residual stalled on a rank-deficient Jacobian even after pseudoinverse steps."""

    pass
