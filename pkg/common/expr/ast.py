"""
Immutable expression trees for basis functions ξ(y, a, x).

Nodes form a small algebra: constants, variables (``x1..xd``, ``a``, ``y``), the
unary operators ``log``, ``exp`` and negation, and the binary operators addition,
multiplication and power with a constant exponent. Trees compare structurally and
are hashable, so identical expressions can be detected across sites.
"""

import math

import numpy as np

from common.exceptions import NonFiniteError
from common.expr.exceptions import DomainError

# Binding strength used by the formatter; higher binds tighter
ADD_PRECEDENCE = 1
MUL_PRECEDENCE = 2
UNARY_PRECEDENCE = 3
POWER_PRECEDENCE = 4
ATOM_PRECEDENCE = 5

UNARY_OPERATORS = ("log", "exp", "neg")
BINARY_OPERATORS = ("add", "mul", "pow")


def format_number(value):
    """Format a float so that ``float(text) == value`` exactly.

    Integral values below 1e16 print without a fractional part (``1`` rather than
    ``1.0``); everything else uses Python's shortest round-trip representation.
    """
    if value == 0:
        return "0"
    if float(value).is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


class Node:
    """Base class for expression nodes."""

    __slots__ = ()

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} nodes are immutable")

    def __delattr__(self, name):
        raise AttributeError(f"{type(self).__name__} nodes are immutable")

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))

    def __repr__(self):
        return f"{type(self).__name__}{self._key()!r}"

    @property
    def precedence(self):
        return ATOM_PRECEDENCE

    def children(self):
        return ()

    def variables(self):
        """Return the set of variable names referenced by this tree."""
        names = set()
        for child in self.children():
            names |= child.variables()
        return names

    def max_covariate_index(self):
        """Return the largest covariate index used, 0 when no covariate appears."""
        return max((child.max_covariate_index() for child in self.children()), default=0)

    def _evaluate(self, x, a, y):
        raise NotImplementedError


class Constant(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteError(f"Constant must be finite, got {value}")
        object.__setattr__(self, "value", value)

    def _key(self):
        return (self.value,)

    @property
    def precedence(self):
        return UNARY_PRECEDENCE if self.value < 0 else ATOM_PRECEDENCE

    def _evaluate(self, x, a, y):
        return np.float64(self.value)


class Variable(Node):
    """Reference to a covariate ``xj`` (1-based), the treatment ``a`` or outcome ``y``."""

    __slots__ = ("name", "index")

    def __init__(self, name):
        if name in ("a", "y"):
            index = 0
        elif name.startswith("x") and name[1:].isdigit() and int(name[1:]) >= 1:
            index = int(name[1:])
        else:
            raise ValueError(f"Not a variable name: {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "index", index)

    def _key(self):
        return (self.name,)

    def variables(self):
        return {self.name}

    def max_covariate_index(self):
        return self.index

    def _evaluate(self, x, a, y):
        if self.name == "a":
            return a
        if self.name == "y":
            return y
        return x[..., self.index - 1]


class Unary(Node):
    __slots__ = ("op", "operand")

    def __init__(self, op, operand):
        if op not in UNARY_OPERATORS:
            raise ValueError(f"Unknown unary operator: {op!r}")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "operand", operand)

    def _key(self):
        return (self.op, self.operand)

    @property
    def precedence(self):
        return UNARY_PRECEDENCE if self.op == "neg" else ATOM_PRECEDENCE

    def children(self):
        return (self.operand,)

    def _evaluate(self, x, a, y):
        value = self.operand._evaluate(x, a, y)
        if self.op == "neg":
            return -value
        if self.op == "log":
            if np.any(value <= 0):
                raise DomainError(
                    f"log received a non-positive value (min {np.min(value):g})",
                    details={"expression": format_expression(self)},
                )
            return np.log(value)
        with np.errstate(over="ignore"):
            return np.exp(value)


class Binary(Node):
    __slots__ = ("op", "left", "right")

    def __init__(self, op, left, right):
        if op not in BINARY_OPERATORS:
            raise ValueError(f"Unknown binary operator: {op!r}")
        if op == "pow" and not isinstance(right, Constant):
            raise ValueError("Power exponents must be numeric constants")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def _key(self):
        return (self.op, self.left, self.right)

    @property
    def precedence(self):
        return {
            "add": ADD_PRECEDENCE,
            "mul": MUL_PRECEDENCE,
            "pow": POWER_PRECEDENCE,
        }[self.op]

    def children(self):
        return (self.left, self.right)

    def _evaluate(self, x, a, y):
        left = self.left._evaluate(x, a, y)
        if self.op == "pow":
            with np.errstate(all="ignore"):
                return np.power(left, self.right.value)
        right = self.right._evaluate(x, a, y)
        if self.op == "add":
            return left + right
        return left * right


def constant(value):
    return Constant(value)


def variable(name):
    return Variable(name)


def log(operand):
    return Unary("log", operand)


def exp(operand):
    return Unary("exp", operand)


def negate(operand):
    return Unary("neg", operand)


def add(left, right):
    return Binary("add", left, right)


def multiply(left, right):
    return Binary("mul", left, right)


def power(base, exponent):
    if not isinstance(exponent, Constant):
        exponent = Constant(exponent)
    return Binary("pow", base, exponent)


def _wrap(node, minimum):
    text = format_expression(node)
    if node.precedence < minimum:
        return f"({text})"
    return text


def _format_negated(operand):
    # "-x" and "-log(y)" are unambiguous; anything else is parenthesized so that
    # a leading digit is not folded into a negative literal
    text = format_expression(operand)
    if isinstance(operand, Variable) or (
        isinstance(operand, Unary) and operand.op in ("log", "exp")
    ):
        return f"-{text}"
    return f"-({text})"


def format_expression(node):
    """Return the canonical text of an expression tree.

    ``+``/``-`` are surrounded by single spaces, ``*`` and ``^`` are written without
    spaces, and the minimum number of parentheses is emitted that still parses back
    to the identical tree.

    Parameters
    ----------
    node : Node
        Expression tree

    Returns
    -------
    str
        Canonical expression text
    """
    if isinstance(node, Constant):
        return format_number(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return _format_negated(node.operand)
        return f"{node.op}({format_expression(node.operand)})"

    if node.op == "add":
        left = _wrap(node.left, ADD_PRECEDENCE)
        right = node.right
        if isinstance(right, Unary) and right.op == "neg":
            return f"{left} - {_wrap(right.operand, MUL_PRECEDENCE)}"
        return f"{left} + {_wrap(right, MUL_PRECEDENCE)}"
    if node.op == "mul":
        return f"{_wrap(node.left, MUL_PRECEDENCE)}*{_wrap(node.right, UNARY_PRECEDENCE)}"
    return f"{_wrap(node.left, POWER_PRECEDENCE)}^{format_number(node.right.value)}"


def evaluate(node, x, a, y):
    """Evaluate an expression at one observation or a batch of observations.

    Parameters
    ----------
    node : Node
        Expression tree
    x : array-like
        Covariates, shape ``(d,)`` for one observation or ``(n, d)`` for a batch
    a : float or array-like
        Treatment indicator(s)
    y : float or array-like
        Outcome(s)

    Returns
    -------
    float or numpy.ndarray
        Value per observation

    Raises
    ------
    DomainError
        If ``log`` receives a non-positive value
    NonFiniteError
        If the result contains inf or nan
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)

    value = node._evaluate(x, a, y)
    shape = np.broadcast_shapes(x.shape[:-1], a.shape, y.shape)
    value = np.broadcast_to(np.asarray(value, dtype=float), shape)
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(
            f"Expression '{format_expression(node)}' produced a non-finite value",
            details={"expression": format_expression(node)},
        )
    if value.ndim == 0:
        return float(value)
    return np.array(value)
