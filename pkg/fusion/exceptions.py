"""
Custom exceptions for the fusion app.
"""

from common.exceptions import EcoAteError


class FusionError(EcoAteError):
    """Base class for estimation and protocol errors."""

    pass


class DataFormatError(FusionError):
    """A site table is malformed - missing columns, missing values, non-binary arms."""

    pass


class EmptyArmError(FusionError):
    """A treatment arm has no observations where both arms are required."""

    pass


class SchemaVersionMismatchError(FusionError):
    """A message or package carries an unsupported schema version."""

    pass


class MessageValidationError(FusionError):
    """A message payload failed schema validation."""

    pass


class ProtocolError(FusionError):
    """Protocol contract violated, e.g. a duplicate send or an inconsistent package."""

    pass


class SiteTimeoutError(FusionError, TimeoutError):
    """A site's message did not arrive within the round timeout."""

    pass


class ZeroVarianceError(FusionError):
    """An inverse-variance weight was requested for a zero standard error."""

    pass
