"""
Project-wide exceptions shared by the numerical libraries and the apps.
"""


class EcoAteError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigurationError(EcoAteError):
    """Configuration issues - unknown keys, invalid values, missing files."""

    pass


class UsageError(EcoAteError):
    """Invalid command-line usage - conflicting or missing options."""

    pass


class DimensionMismatchError(EcoAteError):
    """Array shapes or model dimensions do not agree."""

    pass


class NonFiniteError(EcoAteError):
    """An input or result contains inf or nan."""

    pass
