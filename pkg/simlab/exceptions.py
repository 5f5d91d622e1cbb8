"""
Custom exceptions for the simlab app.
"""

from common.exceptions import EcoAteError


class SimulationError(EcoAteError):
    """Base class for simulation lab errors."""

    pass


class InvalidShapeError(SimulationError):
    """The scenario produces a non-positive Gamma shape for some record."""

    pass


class InsufficientRowsError(SimulationError):
    """Fewer than two successful replications are available for an estimator."""

    pass
