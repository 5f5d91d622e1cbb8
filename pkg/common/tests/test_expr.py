import numpy as np
import pytest

from common.exceptions import DimensionMismatchError, NonFiniteError
from common.expr import (
    BasisVector,
    Binary,
    Constant,
    Unary,
    Variable,
    evaluate,
    format_expression,
    parse_expression,
)
from common.expr.ast import add, exp, log, multiply, negate, power
from common.expr.exceptions import (
    DomainError,
    ExpressionError,
    ExpressionSyntaxError,
    UnknownVariableError,
)

CONSTANTS = (0.5, 2.0, 3.25, -1.5, 1e-05, 12.0)
EXPONENTS = (2.0, 3.0, -1.0, 0.5)


def random_tree(rng, depth, dimension=2):
    """Random expression tree over the full grammar."""
    if depth == 0 or rng.random() < 0.2:
        choice = rng.integers(3)
        if choice == 0:
            return Constant(CONSTANTS[rng.integers(len(CONSTANTS))])
        names = ["a", "y"] + [f"x{j}" for j in range(1, dimension + 1)]
        return Variable(names[rng.integers(len(names))])
    kind = rng.integers(6)
    if kind == 0:
        return log(random_tree(rng, depth - 1, dimension))
    if kind == 1:
        return exp(random_tree(rng, depth - 1, dimension))
    if kind == 2:
        return negate(random_tree(rng, depth - 1, dimension))
    if kind == 3:
        return add(
            random_tree(rng, depth - 1, dimension), random_tree(rng, depth - 1, dimension)
        )
    if kind == 4:
        return multiply(
            random_tree(rng, depth - 1, dimension), random_tree(rng, depth - 1, dimension)
        )
    exponent = EXPONENTS[rng.integers(len(EXPONENTS))]
    return power(random_tree(rng, depth - 1, dimension), exponent)


class TestParseExpression:
    """Test parsing of basis expression text."""

    def test_parse_product_with_log(self):
        """Test that x1*a*log(y) parses left-associatively."""
        node = parse_expression("x1*a*log(y)", 1)

        product = Binary("mul", Variable("x1"), Variable("a"))
        expected = Binary("mul", product, Unary("log", Variable("y")))
        assert node == expected

    def test_whitespace_is_insignificant(self):
        """Test that spacing does not change the tree."""
        assert parse_expression(" a * log( y ) ", 1) == parse_expression("a*log(y)", 1)

    def test_subtraction_is_addition_of_negation(self):
        """Test that a - b is represented as add(a, neg(b))."""
        node = parse_expression("x1 - y", 1)

        assert node == Binary("add", Variable("x1"), Unary("neg", Variable("y")))

    def test_negative_literal(self):
        """Test that a minus directly before a number is a negative constant."""
        assert parse_expression("-2", 1) == Constant(-2.0)
        squared = Binary("pow", Constant(2.0), Constant(2.0))
        assert parse_expression("-2^2", 1) == Unary("neg", squared)

    def test_negative_exponent(self):
        """Test that the power exponent may carry a sign."""
        node = parse_expression("y^-2", 1)

        assert node == Binary("pow", Variable("y"), Constant(-2.0))

    @pytest.mark.parametrize(
        "text, position",
        [
            ("x1 +", 4),
            ("log(y", 5),
            ("a $ y", 2),
            ("", 0),
            ("y^x1", 2),
        ],
    )
    def test_syntax_errors_carry_position(self, text, position):
        """Test that malformed text raises with the offending position."""
        with pytest.raises(ExpressionSyntaxError) as error:
            parse_expression(text, 1)

        assert error.value.position == position

    def test_covariate_beyond_dimension(self):
        """Test that x3 is rejected when only two covariates are declared."""
        with pytest.raises(UnknownVariableError):
            parse_expression("x3*a", 2)

    def test_unknown_identifier(self):
        """Test that identifiers outside the grammar are rejected."""
        with pytest.raises(UnknownVariableError):
            parse_expression("sin(y)", 1)


class TestFormatExpression:
    """Test canonical formatting of expression trees."""

    @pytest.mark.parametrize(
        "text, canonical",
        [
            ("x1*a*log(y)", "x1*a*log(y)"),
            ("a*(log(y))", "a*log(y)"),
            ("(x1+y)*a", "(x1 + y)*a"),
            ("x1 - (y + a)", "x1 - (y + a)"),
            ("-(x1)", "-x1"),
            ("(-x1)^2", "(-x1)^2"),
            ("2.0*y", "2*y"),
            ("x1*(y*a)", "x1*(y*a)"),
        ],
    )
    def test_canonical_text(self, text, canonical):
        """Test the canonical text of a few expressions."""
        assert format_expression(parse_expression(text, 1)) == canonical

    def test_random_trees_round_trip(self):
        """Test that formatting then parsing 100 random trees gives the same trees."""
        rng = np.random.default_rng(20240611)

        for _ in range(100):
            tree = random_tree(rng, depth=4)
            text = format_expression(tree)
            assert parse_expression(text, 2) == tree, text

    def test_constants_format_exactly(self):
        """Test that constants survive formatting bit for bit."""
        for value in (0.1, 1 / 3, 2.5e-12, 123456789.125):
            node = parse_expression(format_expression(Constant(value)), 1)
            assert node.value == value


class TestEvaluate:
    """Test evaluation of expression trees."""

    def setup_method(self):
        """Set up a small batch of observations."""
        self.X = np.array([[1.0, 2.0], [1.5, 0.5], [2.0, 1.0]])
        self.A = np.array([0.0, 1.0, 1.0])
        self.Y = np.array([0.5, 2.0, 3.0])

    def test_batch_evaluation(self):
        """Test evaluation of x1*a*log(y) on a batch."""
        node = parse_expression("x1*a*log(y)", 2)

        values = evaluate(node, self.X, self.A, self.Y)

        np.testing.assert_allclose(values, self.X[:, 0] * self.A * np.log(self.Y))

    def test_single_observation(self):
        """Test evaluation at one observation."""
        node = parse_expression("x2 + a*y^2", 2)

        assert evaluate(node, self.X[1], 1.0, 2.0) == pytest.approx(0.5 + 4.0)

    def test_log_of_non_positive_value(self):
        """Test that log of a non-positive value raises DomainError."""
        node = parse_expression("log(y - 1)", 2)

        with pytest.raises(DomainError):
            evaluate(node, self.X, self.A, self.Y)

    def test_overflow_is_non_finite(self):
        """Test that exp overflow is reported rather than returned."""
        node = parse_expression("exp(1000*y)", 2)

        with pytest.raises(NonFiniteError):
            evaluate(node, self.X, self.A, self.Y)


class TestBasisVector:
    """Test BasisVector construction and evaluation."""

    def test_parse_separated_string(self):
        """Test that a ';'-separated string gives one expression per part."""
        basis = BasisVector.parse("x1*log(y); x1*a*log(y)", 1)

        assert basis.forms == ["x1*log(y)", "x1*a*log(y)"]
        assert len(basis) == 2

    def test_evaluate_shape(self):
        """Test that evaluation returns one column per expression."""
        basis = BasisVector.parse(["a*log(y)", "1"], 1)
        X = np.ones((4, 1))

        values = basis.evaluate(X, np.array([0, 1, 0, 1]), np.full(4, np.e))

        assert values.shape == (4, 2)
        np.testing.assert_allclose(values[:, 0], [0.0, 1.0, 0.0, 1.0])
        np.testing.assert_allclose(values[:, 1], 1.0)

    def test_duplicates_rejected(self):
        """Test that repeated expressions are rejected."""
        with pytest.raises(ExpressionError):
            BasisVector.parse(["a*log(y)", "a * log(y)"], 1)

    def test_empty_rejected(self):
        """Test that an empty basis is rejected."""
        with pytest.raises(ExpressionError):
            BasisVector([], 1)

    def test_dimension_mismatch_on_evaluation(self):
        """Test that evaluating with too few covariates fails."""
        basis = BasisVector.parse(["x2*a"], 2)

        with pytest.raises(DimensionMismatchError):
            basis.evaluate(np.ones((3, 1)), np.ones(3), np.ones(3))

    def test_equal_bases_hash_equal(self):
        """Test that identical bases compare and hash equal."""
        first = BasisVector.parse("a*log(y)", 1)
        second = BasisVector.parse(["a * log(y)"], 1)

        assert first == second
        assert hash(first) == hash(second)
