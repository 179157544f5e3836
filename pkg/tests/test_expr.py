import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis.strategies import floats, integers, sampled_from

from lib.errors import DomainError, ParseError, UnsupportedNode
from lib.expr import (
    BExpr,
    SmoothnessClass,
    b_derivative,
    boundary_symbol,
    classify_function,
    const,
    leading_behavior,
    parse,
)

X = boundary_symbol("x")

SAMPLE_EXPRESSIONS = [
    "(pow x 1/2)",
    "(* x (log x))",
    "(exp x)",
    "(sin (log x))",
    "(+ 1 (pow x 3/2))",
    "(/ 1 (+ 2 x))",
    "(cos x)",
]

# ===== Helper Functions =====


def same(a: sp.Expr, b: sp.Expr) -> bool:
    """Symbolic equality up to simplification"""
    return sp.simplify(a - b) == 0


# ===== Parsing =====


def test_parse_round_trip():
    """Test the s-expression form survives parse and print"""
    e = parse("(pow x 1/2)")
    assert e.to_sexpr() == "(pow x 1/2)"
    assert parse(e.to_sexpr()).expr == e.expr


def test_parse_interior_variables():
    """Test interior variables are real symbols and boundary ones positive"""
    e = parse("(* x (exp y))", boundary=["x"], interior=["y"])
    assert e.variables == ("x", "y")
    assert e.symbol("x").is_positive
    assert e.symbol("y").is_real and not e.symbol("y").is_positive


@pytest.mark.parametrize("text", ["(foo x)", "(+ x", "x y", "(pow x y)", "z"])
def test_parse_errors(text):
    """Test malformed or unknown input is rejected"""
    with pytest.raises(ParseError):
        parse(text)


def test_float_constants_rejected():
    """Test only exact rationals are accepted"""
    with pytest.raises(UnsupportedNode):
        BExpr(sp.Float(0.5) * X)


def test_decimal_text_is_exact():
    """Test decimal literals are read as rationals"""
    assert parse("(pow x 0.5)").expr == sp.sqrt(X)


# ===== b-derivatives =====


def test_b_derivative_of_power():
    """Test x d/dx of x^a is a x^a"""
    e = parse("(pow x 3/2)")
    assert same(b_derivative(e, "x").expr, sp.Rational(3, 2) * X ** sp.Rational(3, 2))


@pytest.mark.parametrize("l", [1, 2, 3])
def test_iterated_b_derivative_of_inverse_log(l):
    """Test the l-th b-derivative of 1/log x is (-1)^l l! (log x)^(-l-1)"""
    e = parse("(/ 1 (log x))")
    for _ in range(l):
        e = b_derivative(e, "x")
    expected = (-1) ** l * math.factorial(l) * sp.log(X) ** (-l - 1)
    assert same(e.expr, expected)


def test_b_derivative_of_constant():
    """Test constants are killed"""
    assert b_derivative(const(7), "x").is_zero()


def test_b_derivative_of_oscillation():
    """Test x^a sin(log x) differentiates to x^a (a sin(log x) + cos(log x))"""
    e = parse("(* (pow x 1/3) (sin (log x)))")
    a = sp.Rational(1, 3)
    expected = X**a * (a * sp.sin(sp.log(X)) + sp.cos(sp.log(X)))
    assert same(b_derivative(e, "x").expr, expected)


@settings(max_examples=30, deadline=None)
@given(sampled_from(SAMPLE_EXPRESSIONS), sampled_from(SAMPLE_EXPRESSIONS), floats(min_value=0.05, max_value=0.95))
def test_leibniz_rule(f_text, g_text, x):
    """Test b-derivatives obey the product rule"""
    f, g = parse(f_text), parse(g_text)
    lhs = b_derivative(f * g, "x")
    rhs = f * b_derivative(g, "x") + g * b_derivative(f, "x")
    assert abs(lhs.evaluate([x]) - rhs.evaluate([x])) < 1e-10


@settings(max_examples=30, deadline=None)
@given(sampled_from(SAMPLE_EXPRESSIONS), floats(min_value=0.05, max_value=0.95))
def test_finite_difference_agreement(text, x):
    """Test central differences of x f'(x) match the symbolic b-derivative"""
    f = parse(text)
    h = 1e-5
    numeric = (f.evaluate([x * (1 + h)]) - f.evaluate([x * (1 - h)])) / (2 * h)
    exact = b_derivative(f, "x").evaluate([x])
    assert abs(numeric - exact) <= 1e-6 * max(1.0, abs(exact))


@settings(max_examples=20, deadline=None)
@given(integers(min_value=-5, max_value=5), integers(min_value=-5, max_value=5))
def test_b_derivative_is_linear(p, q):
    """Test linearity over rational combinations"""
    f, g = parse("(exp x)"), parse("(* x (log x))")
    combo = const(p) * f + const(q) * g
    expected = const(p) * b_derivative(f, "x") + const(q) * b_derivative(g, "x")
    assert same(b_derivative(combo, "x").expr, expected.expr)


# ===== Leading behaviour =====


@pytest.mark.parametrize(
    "text, alpha, b",
    [
        ("(* (pow x 1/2) (+ 1 x))", Fraction(1, 2), 0),
        ("(/ 1 (log x))", Fraction(0), -1),
        ("(+ (* x (log x)) (pow x 2))", Fraction(1), 1),
        ("(+ 3 x)", Fraction(0), 0),
    ],
)
def test_leading_behavior(text, alpha, b):
    """Test leading exponent and log power at the face"""
    lead = leading_behavior(parse(text), "x")
    assert (lead.alpha, lead.b) == (alpha, b)


def test_leading_behavior_of_zero():
    """Test an identically zero expression is flagged"""
    lead = leading_behavior(parse("(+ x (* -1 x))"), "x")
    assert lead.is_zero
    assert lead.decays


def test_leading_behavior_needs_boundary_face():
    """Test interior variables have no leading behaviour"""
    with pytest.raises(DomainError):
        leading_behavior(parse("(* x y)", ["x"], ["y"]), "y")


# ===== Classification =====


@pytest.mark.parametrize(
    "text, verdict",
    [
        ("(pow x 1/2)", SmoothnessClass.ASmooth),
        ("(* (pow x 1/2) (sin (log x)))", SmoothnessClass.ASmooth),
        ("(/ 1 (log x))", SmoothnessClass.RSmoothNotA),
        ("(/ 1 (loglog x))", SmoothnessClass.RSmoothNotA),
        ("(log x)", SmoothnessClass.NotRDifferentiable),
        ("(exp x)", SmoothnessClass.ASmooth),
    ],
)
def test_classify_function(text, verdict):
    """Test smoothness verdicts of the standard examples"""
    assert classify_function(parse(text)).verdict is verdict


def test_classification_order_is_recorded():
    """Test the certified order follows the argument"""
    report = classify_function(parse("(pow x 1/2)"), order=3)
    assert report.order == 3
    assert report.as_dict()["verdict"] == "a-smooth"


def test_sums_and_products_stay_a_smooth():
    """Test a-smooth functions form an algebra"""
    f, g = parse("(pow x 1/2)"), parse("(* (pow x 1/3) (cos (log x)))")
    for combined in (f + g, f * g):
        assert classify_function(combined).verdict is SmoothnessClass.ASmooth


def test_a_smooth_implies_r_smooth():
    """Test verdict ranks are ordered"""
    assert SmoothnessClass.ASmooth.r_smooth
    assert SmoothnessClass.ASmooth.rank > SmoothnessClass.RSmoothNotA.rank
    assert not SmoothnessClass.RDifferentiableOnly.r_smooth


# ===== Evaluation =====


def test_evaluate_power():
    """Test plain evaluation"""
    assert parse("(pow x 1/2)").evaluate([4]) == pytest.approx(2.0)


def test_evaluate_at_face_uses_limit():
    """Test x log x is 0 on the face"""
    assert parse("(* x (log x))").evaluate([0.0]) == 0.0


def test_evaluate_oscillation():
    """Test x^(3/10) sin(log x) at exp(pi/2)"""
    value = parse("(* (pow x 3/10) (sin (log x)))").evaluate([math.exp(math.pi / 2)])
    assert value == pytest.approx(math.exp(0.3 * math.pi / 2), rel=1e-12)


def test_evaluate_rejects_negative_boundary_coordinate():
    """Test the boundary coordinate must be nonnegative"""
    with pytest.raises(DomainError):
        parse("(pow x 1/2)").evaluate([-1.0])


def test_evaluate_rejects_unbounded_face_value():
    """Test log x has no value on the face"""
    with pytest.raises(DomainError):
        parse("(log x)").evaluate([0.0])
