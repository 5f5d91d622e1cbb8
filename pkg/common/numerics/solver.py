"""
Damped Newton root finding for the moment-matching systems.
"""

import logging

import numpy as np

from common.exceptions import NonFiniteError
from common.expr.exceptions import DomainError
from common.numerics.exceptions import NoConvergenceError, SingularJacobianError
from common.numerics.linalg import pinv

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
MAX_HALVINGS = 20
MAX_RESTARTS = 3
SINGULAR_RTOL = 1e-10
# A pseudoinverse step that removes less than this share of the residual is a stall
STALL_RATIO = 0.9
JITTER_SCALE = 1e-2


def _sup(values):
    return float(np.max(np.abs(values))) if values.size else 0.0


def finite_difference_jacobian(func, x, step_scale=1e-6):
    """Central-difference Jacobian with step ``step_scale·(1 + |x_j|)`` per coordinate."""
    x = np.asarray(x, dtype=float)
    columns = []
    for j in range(x.shape[0]):
        h = step_scale * (1.0 + abs(x[j]))
        forward = x.copy()
        backward = x.copy()
        forward[j] += h
        backward[j] -= h
        difference = np.asarray(func(forward)) - np.asarray(func(backward))
        columns.append(difference / (2.0 * h))
    if not columns:
        return np.zeros((np.asarray(func(x)).shape[0], 0))
    return np.column_stack(columns)


class NewtonSolver:
    """Damped Newton iteration with pseudoinverse fallback.

    Each iteration takes the Newton step, halving it up to ``max_halvings`` times
    until the residual 2-norm decreases. A rank-deficient Jacobian switches to the
    pseudoinverse step; when the residual stalls, the iterate is perturbed by a small
    alternating-sign jitter (at most ``max_restarts`` times) to leave symmetric
    stationary points before giving up.

    Attributes
    ----------
    iterations : int
        Iterations used by the last ``solve`` call
    residual : float
        Residual sup-norm at the returned point of the last ``solve`` call
    """

    def __init__(
        self,
        tol=DEFAULT_TOL,
        max_iter=DEFAULT_MAX_ITER,
        max_halvings=MAX_HALVINGS,
        max_restarts=MAX_RESTARTS,
    ):
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.max_restarts = max_restarts
        self.iterations = 0
        self.residual = None

    @staticmethod
    def _evaluate(func, x):
        value = np.atleast_1d(np.asarray(func(x), dtype=float))
        if not np.all(np.isfinite(value)):
            raise NonFiniteError("Residual function returned non-finite values")
        return value

    @staticmethod
    def _step(jacobian, residual):
        if jacobian.size == 0:
            return np.zeros(jacobian.shape[1]), False
        singular_values = np.linalg.svd(jacobian, compute_uv=False)
        square = jacobian.shape[0] == jacobian.shape[1]
        singular = (
            not square
            or singular_values[-1] <= SINGULAR_RTOL * singular_values[0]
            or singular_values[0] == 0
        )
        if singular:
            return -pinv(jacobian) @ residual, True
        return -np.linalg.solve(jacobian, residual), False

    def _jitter(self, x, attempt):
        pattern = np.where(np.arange(x.shape[0]) % 2 == 0, 1.0, -1.0)
        return x + JITTER_SCALE * (attempt + 1) * (1.0 + np.abs(x)) * pattern

    def solve(self, func, start, jacobian=None):
        """Find x with ``sup|func(x)| < tol``.

        Parameters
        ----------
        func : callable
            Maps a 1-D array to a 1-D residual array
        start : array-like
            Starting point
        jacobian : callable, optional
            Analytic Jacobian; central differences are used when omitted

        Returns
        -------
        numpy.ndarray
            Root of ``func``

        Raises
        ------
        NonFiniteError
            If ``func`` is not finite at ``start``
        NoConvergenceError
            If the tolerance is not met; carries the best iterate and its residual
        SingularJacobianError
            If the residual stalls on a rank-deficient Jacobian
        """
        x = np.atleast_1d(np.asarray(start, dtype=float)).copy()
        fx = self._evaluate(func, x)
        best_x, best_residual = x.copy(), _sup(fx)
        restarts = 0
        singular = False

        for iteration in range(1, self.max_iter + 1):
            self.iterations = iteration - 1
            if _sup(fx) < self.tol:
                self.residual = _sup(fx)
                return x

            if jacobian is None:
                jac = finite_difference_jacobian(func, x)
            else:
                jac = jacobian(x)
            jac = np.atleast_2d(np.asarray(jac, dtype=float))
            if not np.all(np.isfinite(jac)):
                raise NoConvergenceError(
                    "Jacobian is not finite", best_x, best_residual, iteration
                )
            step, singular = self._step(jac, fx)

            current = float(np.linalg.norm(fx))
            accepted = None
            scale = 1.0
            for _ in range(self.max_halvings + 1):
                candidate = x + scale * step
                try:
                    f_candidate = self._evaluate(func, candidate)
                except (NonFiniteError, DomainError):
                    f_candidate = None
                if f_candidate is not None and np.linalg.norm(f_candidate) < current:
                    accepted = (candidate, f_candidate)
                    break
                scale *= 0.5

            stalled = accepted is None or (
                singular and np.linalg.norm(accepted[1]) > STALL_RATIO * current
            )
            if accepted is not None:
                x, fx = accepted
                if _sup(fx) < best_residual:
                    best_x, best_residual = x.copy(), _sup(fx)
            logger.debug(
                f"Newton iteration {iteration}: residual {_sup(fx):.3e}, "
                f"step scale {scale:.3g}, singular={singular}"
            )

            if stalled and _sup(fx) >= self.tol:
                if restarts >= self.max_restarts:
                    error_class = (
                        SingularJacobianError if singular else NoConvergenceError
                    )
                    self.iterations = iteration
                    self.residual = best_residual
                    raise error_class(
                        f"Newton solver stalled at residual {best_residual:.3e}",
                        best_x,
                        best_residual,
                        iteration,
                    )
                jittered = self._jitter(x, restarts)
                restarts += 1
                try:
                    f_jittered = self._evaluate(func, jittered)
                except (NonFiniteError, DomainError):
                    continue
                x, fx = jittered, f_jittered

        self.iterations = self.max_iter
        if _sup(fx) < self.tol:
            self.residual = _sup(fx)
            return x
        self.residual = best_residual
        error_class = SingularJacobianError if singular else NoConvergenceError
        raise error_class(
            f"Newton solver did not converge in {self.max_iter} iterations "
            f"(best residual {best_residual:.3e})",
            best_x,
            best_residual,
            self.max_iter,
        )


def newton_solve(func, start, jacobian=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Functional wrapper around ``NewtonSolver.solve``."""
    return NewtonSolver(tol=tol, max_iter=max_iter).solve(func, start, jacobian)
