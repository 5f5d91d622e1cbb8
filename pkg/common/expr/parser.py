"""
Recursive-descent parser for basis expressions.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary ('*' unary)*
    unary   := '-' unary | postfix
    postfix := primary ('^' ['-'] number)*
    primary := number | ident | func '(' expr ')' | '(' expr ')'
    ident   := x1 .. xd | a | y
    func    := log | exp

A leading minus directly in front of a number literal is read as a negative
constant unless the literal is raised to a power (``-2^2`` is ``-(2^2)``).
``a - b`` is represented as ``add(a, neg(b))``.
"""

import re

from common.expr.ast import Binary, Constant, Unary, Variable
from common.expr.exceptions import ExpressionSyntaxError, UnknownVariableError

NUMBER = "number"
IDENT = "ident"
OPERATOR = "operator"
END = "end"

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<operator>[-+*^()])
    """,
    re.VERBOSE,
)

FUNCTIONS = ("log", "exp")


class Token:
    """A lexical token with its source position."""

    __slots__ = ("kind", "text", "position")

    def __init__(self, kind, text, position):
        self.kind = kind
        self.text = text
        self.position = position

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.position})"


def tokenize(text):
    """Split expression text into tokens.

    Raises
    ------
    ExpressionSyntaxError
        On any character outside the grammar's alphabet
    """
    tokens = []
    position = 0
    while position < len(text):
        match = _TOKEN_PATTERN.match(text, position)
        if match is None:
            raise ExpressionSyntaxError(
                f"Unexpected character {text[position]!r}", position, text
            )
        kind = match.lastgroup
        if kind != "space":
            tokens.append(Token(kind, match.group(), position))
        position = match.end()
    tokens.append(Token(END, "", len(text)))
    return tokens


class Parser:
    """Parse one expression for a declared covariate dimension ``d``."""

    def __init__(self, text, dimension):
        self.text = text
        self.dimension = dimension
        self.tokens = tokenize(text)
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def _peek(self, offset=1):
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def _advance(self):
        token = self.current
        self.index += 1
        return token

    def _error(self, message, token=None):
        token = token or self.current
        return ExpressionSyntaxError(message, token.position, self.text)

    def _is_operator(self, symbol, token=None):
        token = token or self.current
        return token.kind == OPERATOR and token.text == symbol

    def _expect(self, symbol):
        if not self._is_operator(symbol):
            found = self.current.text or "end of input"
            raise self._error(f"Expected '{symbol}' but found '{found}'")
        return self._advance()

    def parse(self):
        if self.current.kind == END:
            raise self._error("Empty expression")
        node = self._expression()
        if self.current.kind != END:
            raise self._error(f"Unexpected token '{self.current.text}'")
        return node

    def _expression(self):
        node = self._term()
        while self._is_operator("+") or self._is_operator("-"):
            symbol = self._advance().text
            right = self._term()
            if symbol == "-":
                right = Unary("neg", right)
            node = Binary("add", node, right)
        return node

    def _term(self):
        node = self._unary()
        while self._is_operator("*"):
            self._advance()
            node = Binary("mul", node, self._unary())
        return node

    def _unary(self):
        if not self._is_operator("-"):
            return self._postfix(self._primary())
        self._advance()
        if self.current.kind == NUMBER and not self._is_operator("^", self._peek()):
            literal = self._advance()
            return self._postfix(Constant(-float(literal.text)))
        return Unary("neg", self._unary())

    def _postfix(self, node):
        while self._is_operator("^"):
            self._advance()
            sign = 1.0
            if self._is_operator("-"):
                self._advance()
                sign = -1.0
            if self.current.kind != NUMBER:
                raise self._error("Power exponent must be a numeric literal")
            exponent = sign * float(self._advance().text)
            node = Binary("pow", node, Constant(exponent))
        return node

    def _primary(self):
        token = self.current
        if token.kind == NUMBER:
            self._advance()
            return Constant(float(token.text))
        if self._is_operator("("):
            self._advance()
            node = self._expression()
            self._expect(")")
            return node
        if token.kind == IDENT:
            self._advance()
            if token.text in FUNCTIONS:
                self._expect("(")
                operand = self._expression()
                self._expect(")")
                return Unary(token.text, operand)
            return self._variable(token)
        found = token.text or "end of input"
        raise self._error(f"Unexpected token '{found}'")

    def _variable(self, token):
        name = token.text
        if name in ("a", "y"):
            return Variable(name)
        if name.startswith("x") and name[1:].isdigit():
            index = int(name[1:])
            if 1 <= index <= self.dimension:
                return Variable(name)
            raise UnknownVariableError(
                f"Variable '{name}' exceeds covariate dimension d={self.dimension}",
                details={"name": name, "position": token.position},
            )
        raise UnknownVariableError(
            f"Unknown identifier '{name}' at position {token.position}",
            details={"name": name, "position": token.position},
        )


def parse_expression(text, dimension):
    """Parse expression text into an immutable tree.

    Parameters
    ----------
    text : str
        Expression, e.g. ``"x1*a*log(y)"``
    dimension : int
        Covariate dimension d; ``x1..xd`` are valid identifiers

    Returns
    -------
    Node
        Parsed expression tree

    Raises
    ------
    ExpressionSyntaxError
        On malformed input, annotated with the character position
    UnknownVariableError
        When an identifier is not one of ``x1..xd``, ``a`` or ``y``
    """
    return Parser(text, dimension).parse()
