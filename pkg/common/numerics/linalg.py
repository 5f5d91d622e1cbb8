"""
Linear-algebra kernels: Moore–Penrose pseudoinverse and ridge least squares.
"""

import numpy as np
from scipy.linalg import solve_triangular

from common.exceptions import DimensionMismatchError, NonFiniteError

DEFAULT_PINV_TOL = 1e-10


def check_finite(array, name="input"):
    """Raise ``NonFiniteError`` when ``array`` contains inf or nan."""
    array = np.asarray(array, dtype=float)
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} contains non-finite values")
    return array


def pinv(matrix, rel_tol=DEFAULT_PINV_TOL):
    """Moore–Penrose pseudoinverse via singular value decomposition.

    Singular values at or below ``rel_tol`` times the largest singular value are
    treated as zero. Stacked input of shape ``(..., m, n)`` is inverted matrix by
    matrix with a per-matrix cutoff.

    Parameters
    ----------
    matrix : array-like
        Matrix of shape ``(m, n)`` or a stack ``(..., m, n)``
    rel_tol : float, optional
        Relative singular-value cutoff, default 1e-10

    Returns
    -------
    numpy.ndarray
        Pseudoinverse of shape ``(n, m)`` (or ``(..., n, m)``)

    Raises
    ------
    NonFiniteError
        If the input contains inf or nan
    """
    matrix = check_finite(matrix, "pinv input")
    if matrix.ndim < 2:
        raise DimensionMismatchError(f"pinv expects a matrix, got shape {matrix.shape}")
    if matrix.shape[-1] == 0 or matrix.shape[-2] == 0:
        return np.zeros(matrix.shape[:-2] + (matrix.shape[-1], matrix.shape[-2]))

    u, singular, vt = np.linalg.svd(matrix, full_matrices=False)
    cutoff = rel_tol * np.max(singular, axis=-1, keepdims=True)
    keep = singular > cutoff
    inverse = np.divide(1.0, singular, out=np.zeros_like(singular), where=keep)
    return np.einsum("...ji,...j,...kj->...ik", vt, inverse, u)


def symmetrize(matrix):
    """Return ``(M + Mᵀ) / 2`` over the last two axes."""
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + np.swapaxes(matrix, -1, -2))


class RidgeSolver:
    """Ridge least squares for a fixed design, reusable across many responses.

    Solves ``min ‖y − Dβ‖² + ε‖β‖²`` through a QR factorization of the augmented
    matrix ``[D; √ε I]``, computed once per design.
    """

    def __init__(self, design, ridge=1e-8):
        design = check_finite(design, "design")
        if design.ndim != 2:
            raise DimensionMismatchError(f"Design must be 2-D, got shape {design.shape}")
        self.design = design
        self.ridge = float(ridge)
        n_rows, n_cols = design.shape
        augmented = np.vstack([design, np.sqrt(self.ridge) * np.eye(n_cols)])
        q, r = np.linalg.qr(augmented, mode="reduced")
        self._q_top = q[:n_rows]
        self._r = r

    @property
    def n_rows(self):
        return self.design.shape[0]

    def solve(self, responses):
        """Return coefficients of shape ``(p,)`` or ``(p, q)`` for the given responses."""
        responses = check_finite(responses, "responses")
        if responses.shape[0] != self.n_rows:
            raise DimensionMismatchError(
                f"Responses have {responses.shape[0]} rows, design has {self.n_rows}"
            )
        return solve_triangular(self._r, self._q_top.T @ responses, lower=False)


def ridge_least_squares(design, responses, ridge=1e-8):
    """One-shot ridge least squares; see ``RidgeSolver``."""
    return RidgeSolver(design, ridge).solve(responses)
