import re

import numpy as np

from common.exceptions import DimensionMismatchError
from common.expr.ast import evaluate, format_expression
from common.expr.exceptions import ExpressionError
from common.expr.parser import parse_expression

_LIST_SEPARATOR = re.compile(r"[;,]")


class BasisVector:
    """Ordered, non-empty list of distinct basis expressions ξ_s for one source.

    The vector is immutable; ``forms`` gives the canonical strings that travel in
    protocol messages.
    """

    __slots__ = ("_expressions", "_dimension")

    def __init__(self, expressions, dimension):
        expressions = tuple(expressions)
        if not expressions:
            raise ExpressionError("A basis vector needs at least one expression")
        if len(set(expressions)) != len(expressions):
            forms = [format_expression(node) for node in expressions]
            raise ExpressionError(
                "Basis expressions must be pairwise distinct",
                details={"forms": forms},
            )
        for node in expressions:
            if node.max_covariate_index() > dimension:
                raise DimensionMismatchError(
                    f"Expression '{format_expression(node)}' exceeds "
                    f"dimension {dimension}"
                )
        self._expressions = expressions
        self._dimension = int(dimension)

    @classmethod
    def parse(cls, texts, dimension):
        """Parse a list of expression strings (or one ``;``/``,`` separated string)."""
        if isinstance(texts, str):
            texts = [part for part in _LIST_SEPARATOR.split(texts) if part.strip()]
        return cls([parse_expression(text, dimension) for text in texts], dimension)

    @property
    def expressions(self):
        return self._expressions

    @property
    def dimension(self):
        """Covariate dimension d the expressions were parsed against."""
        return self._dimension

    @property
    def forms(self):
        return [format_expression(node) for node in self._expressions]

    def __len__(self):
        return len(self._expressions)

    def __iter__(self):
        return iter(self._expressions)

    def __eq__(self, other):
        return isinstance(other, BasisVector) and self._expressions == other._expressions

    def __hash__(self):
        return hash(self._expressions)

    def __repr__(self):
        return f"BasisVector({self.forms!r})"

    def evaluate(self, X, A, Y):
        """Evaluate ξ_s at every observation.

        Parameters
        ----------
        X : numpy.ndarray
            Covariates of shape ``(n, d)``
        A : numpy.ndarray
            Treatments of shape ``(n,)``
        Y : numpy.ndarray
            Outcomes of shape ``(n,)``

        Returns
        -------
        numpy.ndarray
            Matrix of shape ``(n, len(self))``
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] < self._dimension:
            raise DimensionMismatchError(
                f"Expected covariates with {self._dimension} columns, got shape {X.shape}"
            )
        columns = [
            np.broadcast_to(evaluate(node, X, A, Y), (X.shape[0],))
            for node in self._expressions
        ]
        return np.column_stack(columns)
