from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis.strategies import fractions, sampled_from, tuples

from lib.atlas import Atlas, Chart, ChartedMap, Transition, compose
from lib.errors import NotBNormal, PositivityViolated, WeightInconsistent
from lib.serialize import rational_text
from lib.weights import (
    Weight,
    boundary_holonomy,
    check_l_lambda_cocycle,
    check_weight,
    l_lambda_transitions,
    pullback_weight,
    pushforward_weight,
    weight_space,
)
from models import interval, quotient_cylinder

# ===== Helper Functions =====


def rescaled_half_lines(alpha: str) -> Atlas:
    """Two copies of [0, 1) glued along all of it by x -> x^alpha"""
    a = Chart("H1", ("x",), 1, ((0, 1),))
    b = Chart("H2", ("x",), 1, ((0, 1),))
    inverse = str(1 / Fraction(alpha))
    t = Transition.build("power", a, b, [f"(pow x {alpha})"], [f"(pow x {inverse})"], ((0, 1),))
    return Atlas("rescaled", (a, b), (t,))


def three_chart_cylinder(alpha: Fraction) -> Atlas:
    """The quotient cylinder cut into three charts, the twist carried by C -> A"""
    a = Chart("A", ("x", "y"), 1, ((0, 1), (-0.1, 0.4)))
    b = Chart("B", ("x", "y"), 1, ((0, 1), (0.3, 0.75)))
    c = Chart("C", ("x", "y"), 1, ((0, 1), (0.65, 1.1)))
    ab = Transition.build("ab", a, b, ["x", "y"], ["x", "y"], ((0, 1), (0.3, 0.4)))
    bc = Transition.build("bc", b, c, ["x", "y"], ["x", "y"], ((0, 1), (0.65, 0.75)))
    ca = Transition.build(
        "ca",
        c,
        a,
        [f"(pow x {rational_text(1 / alpha)})", "(+ y -1)"],
        [f"(pow x {rational_text(alpha)})", "(+ y 1)"],
        ((0, 1), (0.9, 1.1)),
    )
    return Atlas("three_chart_cylinder", (a, b, c), (ab, bc, ca), labels=(("A:x", "x=0"),))


def monomial_map(source: Chart, target: Chart, columns, id: str) -> ChartedMap:
    """Component j is prod_i x_i^columns[j][i]"""
    texts = []
    for powers in columns:
        factors = [
            name if p == 1 else f"(pow {name} {rational_text(p)})" for name, p in zip(source.coords, powers) if p
        ]
        text = factors[0]
        for factor in factors[1:]:
            text = f"(* {text} {factor})"
        texts.append(text)
    return ChartedMap.from_texts(source, target, texts, id=id)


QUADRANT = Chart("Q", ("x", "y"), 2, ((0, 1), (0, 1)))
HALF_LINE = Chart("H", ("x",), 1, ((0, 1),))
exponents = sampled_from([Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)])
columns = tuples(exponents, exponents).filter(any)
weights = fractions(min_value=Fraction(1, 8), max_value=4, max_denominator=12)


# ===== Holonomy =====


def test_untwisted_cylinder():
    """Test alpha = 1 leaves the boundary circle untwisted"""
    report = boundary_holonomy(quotient_cylinder(1))
    component = report["x=0"]
    assert component.holonomy == 1
    assert not component.twisted
    assert weight_space(quotient_cylinder(1)).dimension == 1


@pytest.mark.parametrize("alpha", [Fraction(2), Fraction(3, 2)])
def test_twisted_cylinder(alpha):
    """Test the holonomy of the boundary circle is alpha"""
    component = boundary_holonomy(quotient_cylinder(alpha))["x=0"]
    assert component.twisted
    assert component.holonomy == alpha
    assert "wrap" in component.cycle
    space = weight_space(quotient_cylinder(alpha))
    assert space.dimension == 0
    assert space.twisted == ("x=0",)


@pytest.mark.parametrize("alpha", [Fraction(1), Fraction(2), Fraction(3, 2), Fraction(1, 3)])
def test_holonomy_survives_refinement(alpha):
    """Test an intermediate chart leaves the holonomy of the boundary circle at alpha"""
    (component,) = boundary_holonomy(three_chart_cylinder(alpha)).components
    assert component.holonomy == alpha
    assert component.holonomy == boundary_holonomy(quotient_cylinder(alpha))["x=0"].holonomy
    assert component.twisted == (alpha != 1)
    if component.twisted:
        assert sorted(component.cycle) == ["ab", "bc", "ca"]


def test_interval_weight_space():
    """Test each endpoint carries its own weight"""
    space = weight_space(interval())
    assert space.dimension == 2
    assert sorted(space.untwisted) == ["0", "1"]


# ===== Weights =====


def test_weight_from_components_untwisted():
    weight = Weight.from_components(quotient_cylinder(1), {"x=0": "1/2"})
    assert weight.as_dict() == {"A:x": Fraction(1, 2), "B:x": Fraction(1, 2)}
    check_weight(quotient_cylinder(1), weight)


def test_twisted_weight_is_forced_to_zero():
    """Test a twisted component only admits the zero weight"""
    weight = Weight.from_components(quotient_cylinder(2), {"x=0": "1/2"})
    assert set(weight.as_dict().values()) == {Fraction(0)}
    assert weight.notes


def test_inconsistent_weight_rejected():
    """Test equal chart weights do not match across x -> x^2"""
    with pytest.raises(WeightInconsistent):
        check_weight(quotient_cylinder(2), Weight.of({"A:x": "1/2", "B:x": "1/2"}))


def test_weight_rescales_under_power_transition():
    """Test the chart weight transforms as lambda = alpha * lambda~"""
    atlas = rescaled_half_lines("2")
    weight = Weight.from_components(atlas, {"H1:x": 1})
    assert weight["H1:x"] == 1
    assert weight["H2:x"] == Fraction(1, 2)
    check_weight(atlas, weight)


def test_missing_component_weight():
    with pytest.raises(WeightInconsistent):
        Weight.from_components(interval(), {"0": 1})


def test_weight_order():
    low, high = Weight.of({"a": 0, "b": 1}), Weight.of({"a": 1, "b": 1})
    assert low <= high
    assert high >= low
    assert not high <= low


# ===== Pullback and pushforward =====


def test_pullback_weight(product_map):
    """Test both source faces inherit the target weight"""
    pulled = pullback_weight(product_map, Weight.of({"H:x": "3/2"}))
    assert pulled.as_dict() == {"Q:x": Fraction(3, 2), "Q:y": Fraction(3, 2)}


def test_pushforward_weight(product_map):
    """Test the pushed weight is the smallest ratio"""
    pushed = pushforward_weight(product_map, Weight.of({"Q:x": 1, "Q:y": "1/2"}))
    assert pushed.as_dict() == {"H:x": Fraction(1, 2)}


def test_pull_of_push_is_below(product_map):
    """Test f^*(f_* lambda) <= lambda"""
    weight = Weight.of({"Q:x": 2, "Q:y": "1/3"})
    assert pullback_weight(product_map, pushforward_weight(product_map, weight)) <= weight


def test_pushforward_needs_positive_interior_faces(projection_map):
    """Test a face mapped into the interior needs a positive weight"""
    assert pushforward_weight(projection_map, Weight.of({"Q:x": 1, "Q:y": "1/4"})).as_dict() == {"H:x": 1}
    with pytest.raises(PositivityViolated):
        pushforward_weight(projection_map, Weight.of({"Q:x": 1, "Q:y": 0}))


def test_pushforward_needs_b_normal(quadrant_chart):
    f = ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["x", "(* x y)"], id="blowdown")
    with pytest.raises(NotBNormal):
        pushforward_weight(f, Weight.of({"Q:x": 1, "Q:y": 1}))


# ===== Line bundles =====


def test_line_bundle_transition_on_interval():
    """Test the flip cocycle x^(1/2) (1 - x)^(1/4)"""
    (transition,) = l_lambda_transitions(interval(), Weight.of({"L:x": "1/2", "R:u": "-1/4"}))
    assert transition.transition == "flip"
    assert transition.touched == ()
    assert transition.cocycle.evaluate([0.5]) == pytest.approx(0.5**0.75)


def test_line_bundle_cocycle_closes():
    """Test g_ab g_ba = 1 on every overlap"""
    atlas = quotient_cylinder(1)
    weight = Weight.from_components(atlas, {"x=0": "1/2"})
    assert check_l_lambda_cocycle(atlas, weight) < 1e-10
    assert check_l_lambda_cocycle(interval(), Weight.of({"L:x": "1/2", "R:u": "-1/4"})) < 1e-10


def test_line_bundle_rejects_inconsistent_weight():
    with pytest.raises(WeightInconsistent):
        l_lambda_transitions(quotient_cylinder(2), Weight.of({"A:x": "1/2", "B:x": "1/2"}))


@pytest.mark.parametrize("alpha", [Fraction(1, 2), Fraction(2), Fraction(3, 2), Fraction(5)])
def test_pullback_along_power_map(half_line_chart, alpha):
    """Test x -> x^alpha pulls lambda back to alpha lambda"""
    f = monomial_map(half_line_chart, half_line_chart, [(alpha,)], id="power")
    assert pullback_weight(f, Weight.of({"H:x": "3/4"})).as_dict() == {"H:x": alpha * Fraction(3, 4)}


@settings(max_examples=50, deadline=None)
@given(columns, weights, weights, fractions(min_value=Fraction(1, 1000), max_value=1))
def test_pushforward_is_the_largest_weight_below(column, lam_x, lam_y, epsilon):
    """Test f^*(f_* lambda) <= lambda and f^*(f_* lambda + epsilon) is not"""
    f = monomial_map(QUADRANT, HALF_LINE, [column], id="monomial")
    weight = Weight.of({"Q:x": lam_x, "Q:y": lam_y})
    pushed = pushforward_weight(f, weight)
    assert pullback_weight(f, pushed) <= weight
    raised = Weight.of({"H:x": pushed["H:x"] + epsilon})
    assert not pullback_weight(f, raised) <= weight


@settings(max_examples=25, deadline=None)
@given(tuples(columns, columns), columns, weights)
def test_pullback_is_functorial(f_columns, g_columns, lam):
    """Test (g o f)^* = f^* g^* on monomial maps Q -> Q -> H"""
    f = monomial_map(QUADRANT, QUADRANT, f_columns, id="f")
    g = monomial_map(QUADRANT, HALF_LINE, [g_columns], id="g")
    weight = Weight.of({"H:x": lam})
    assert pullback_weight(compose(f, g), weight) == pullback_weight(f, pullback_weight(g, weight))
