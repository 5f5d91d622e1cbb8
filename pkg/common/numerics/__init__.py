"""
Statistical and linear-algebra kernels shared by the estimation services.
"""

from common.numerics.kernel import KernelModel, kernel_regress, silverman_bandwidth
from common.numerics.linalg import RidgeSolver, pinv, ridge_least_squares, symmetrize
from common.numerics.logistic import LogisticModel, logistic_fit
from common.numerics.sieve import (
    SieveBasisSpec,
    SieveModel,
    SieveProjector,
    Standardizer,
    sieve_fit,
    sieve_predict,
)
from common.numerics.solver import NewtonSolver, finite_difference_jacobian, newton_solve

__all__ = [
    "KernelModel",
    "LogisticModel",
    "NewtonSolver",
    "RidgeSolver",
    "SieveBasisSpec",
    "SieveModel",
    "SieveProjector",
    "Standardizer",
    "finite_difference_jacobian",
    "kernel_regress",
    "logistic_fit",
    "newton_solve",
    "pinv",
    "ridge_least_squares",
    "sieve_fit",
    "sieve_predict",
    "silverman_bandwidth",
    "symmetrize",
]
