"""Parsing helpers shared by the fusion management commands."""

from common.exceptions import DimensionMismatchError, UsageError
from common.expr import BasisVector
from common.expr.exceptions import ExpressionError

NO_SHIFT = ("", "none", "1")


def parse_basis(text, dimension):
    """``--xi`` value to a BasisVector; ``none`` means no outcome shift."""
    if text is None or text.strip().lower() in NO_SHIFT:
        return None
    try:
        return BasisVector.parse(text, dimension)
    except (ExpressionError, DimensionMismatchError) as exc:
        raise UsageError(f"Invalid --xi '{text}': {exc}", details=exc.details) from exc


def source_bases(xi_options, count, dimension):
    """One basis per source: a single ``--xi`` applies to all, otherwise one each."""
    if isinstance(xi_options, str):
        xi_options = [xi_options]
    xi_options = list(xi_options or [])
    if not xi_options:
        return [None] * count
    if len(xi_options) == 1:
        xi_options = xi_options * count
    return [parse_basis(text, dimension) for text in xi_options]

