"""
Expression language exceptions.
"""

from common.exceptions import EcoAteError


class ExpressionError(EcoAteError):
    """Base exception for basis-expression parsing and evaluation."""

    pass


class ExpressionSyntaxError(ExpressionError):
    """Raised when expression text does not conform to the grammar."""

    def __init__(self, message, position=None, text=None):
        """Initialize syntax error.

        Parameters
        ----------
        message : str
            Human-readable error message
        position : int, optional
            Zero-based character offset of the offending token
        text : str, optional
            The full expression text being parsed
        """
        if position is not None:
            message = f"{message} at position {position}"
            if text is not None:
                message = f"{message}\n  {text}\n  {' ' * position}^"
        super().__init__(message, details={"position": position, "text": text})
        self.position = position


class UnknownVariableError(ExpressionError):
    """Raised when an identifier is not a variable of the declared dimension."""

    pass


class DomainError(ExpressionError):
    """Raised when log receives a non-positive value."""

    pass
