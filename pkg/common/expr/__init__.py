"""
Basis-expression language.

Weight functions w_s = exp(β_sᵀ ξ_s(y, a, x)) are described by expression strings so
that their form can travel between sites; this package parses, formats and
evaluates those strings.
"""

from common.expr.ast import (
    Binary,
    Constant,
    Node,
    Unary,
    Variable,
    evaluate,
    format_expression,
)
from common.expr.basis import BasisVector
from common.expr.parser import parse_expression

__all__ = [
    "BasisVector",
    "Binary",
    "Constant",
    "Node",
    "Unary",
    "Variable",
    "evaluate",
    "format_expression",
    "parse_expression",
]
