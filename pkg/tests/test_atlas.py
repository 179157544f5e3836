from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis.strategies import sampled_from, tuples

from lib import env_loader
from lib.atlas import (
    Chart,
    ChartedMap,
    boundary_atlas,
    boundary_components,
    boundary_counts,
    check_transitions,
    classify_map,
    compose,
    corner_at,
    corner_counts,
    corner_map,
    depth,
    exponent_matrix,
    factor_components,
    faces_embedded,
    product_atlas,
    require_interior,
)
from lib.errors import DomainError, FactorizationFailure, NotInterior
from lib.serialize import rational_text
from models import circle, half_line, interval, quadrant, quotient_cylinder

# ===== Helper Functions =====


def all_corners(chart: Chart):
    """Every local corner component of a chart, the interior included"""
    from itertools import combinations

    for size in range(chart.k + 1):
        for faces in combinations(chart.boundary, size):
            yield corner_at(chart, faces)


def convolution(left, right):
    out = {}
    for i, a in left.items():
        for j, b in right.items():
            out[i + j] = out.get(i + j, 0) + a * b
    return out


def monomial_text(powers) -> str:
    factors = [name if p == 1 else f"(pow {name} {rational_text(p)})" for name, p in zip(("x", "y"), powers) if p]
    text = factors[0]
    for factor in factors[1:]:
        text = f"(* {text} {factor})"
    return text


def monomial_map(columns, id: str) -> ChartedMap:
    """Q -> Q with component j equal to x^a y^b for columns[j] = (a, b)"""
    chart = Chart("Q", ("x", "y"), 2, ((0, 1), (0, 1)))
    return ChartedMap.from_texts(chart, chart, [monomial_text(c) for c in columns], id=id)


def matmul(left, right):
    return tuple(
        tuple(sum((left[i][j] * right[j][k] for j in range(len(right))), Fraction(0)) for k in range(len(right[0])))
        for i in range(len(left))
    )


exponents = sampled_from([Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)])
columns = tuples(exponents, exponents).filter(any)
monomial_columns = tuples(columns, columns)


# ===== Charts =====


def test_chart_faces(quadrant_chart):
    """Test boundary coordinates come first and name the faces"""
    assert quadrant_chart.boundary == ("x", "y")
    assert quadrant_chart.faces == ("Q:x", "Q:y")


def test_chart_rejects_shifted_boundary():
    """Test boundary coordinates must start at 0"""
    with pytest.raises(DomainError):
        Chart("bad", ("x",), 1, ((0.5, 1),))


def test_depth(quadrant_chart):
    """Test depth counts vanishing boundary coordinates"""
    assert depth((0.0, 0.0), quadrant_chart) == 2
    assert depth((0.0, 0.3), quadrant_chart) == 1
    assert depth((0.2, 0.3), quadrant_chart) == 0
    with pytest.raises(DomainError):
        depth((2.0, 0.3), quadrant_chart)


# ===== Map classification =====


def test_product_map_flags(product_map):
    """Test (x, y) -> xy is b-normal but not strongly smooth"""
    flags = classify_map(product_map)
    assert flags.smooth and flags.interior and flags.b_normal
    assert not flags.strongly_smooth
    assert flags.exponent_matrix == ((Fraction(1),), (Fraction(1),))


def test_projection_flags(projection_map):
    """Test the projection is b-normal and strongly smooth"""
    flags = classify_map(projection_map)
    assert flags.b_normal and flags.strongly_smooth
    assert exponent_matrix(projection_map) == ((Fraction(1),), (Fraction(0),))


def test_power_map_is_a_diffeomorphism(half_line_chart, square_map):
    """Test x -> x^2 with inverse x^(1/2)"""
    inverse = ChartedMap.from_texts(half_line_chart, half_line_chart, ["(pow x 1/2)"], id="root")
    assert classify_map(square_map, inverse).diffeo
    assert not classify_map(square_map).diffeo


def test_factorization(quadrant_chart, half_line_chart):
    """Test f = F x^a y^b with F positive"""
    f = ChartedMap.from_texts(quadrant_chart, half_line_chart, ["(* (pow x 2) y (exp x))"], id="f")
    (component,) = factor_components(f)
    assert component.exponents == (Fraction(2), Fraction(1))
    assert component.factor.to_sexpr() == "(exp x)"


def test_factorization_failure(half_line_chart):
    """Test a logarithmic component cannot be factored"""
    f = ChartedMap.from_texts(half_line_chart, half_line_chart, ["(* -1 (* x (log x)))"], id="f")
    with pytest.raises(FactorizationFailure):
        factor_components(f)


def test_zero_component_is_not_interior(quadrant_chart, half_line_chart):
    """Test a map into the face is flagged"""
    f = ChartedMap.from_texts(quadrant_chart, half_line_chart, ["0"], id="zero")
    assert not classify_map(f).interior
    with pytest.raises(NotInterior):
        require_interior(f)


def test_reload_clears_settings_caches(monkeypatch, product_map):
    """Test factorizations cached under one order are dropped when the settings reload"""
    classify_map(product_map)
    assert factor_components.cache_info().currsize > 0
    monkeypatch.setenv("BCALC_ORDER", "3")
    env_loader.reload()
    assert env_loader.BCALC_ORDER == 3
    assert factor_components.cache_info().currsize == 0
    assert classify_map.cache_info().currsize == 0
    assert classify_map(product_map).exponent_matrix == ((1,), (1,))


# ===== Corners =====


def test_corner_map_of_product(product_map, quadrant_chart):
    """Test both faces and the corner land on the boundary point"""
    assert corner_map(product_map, corner_at(quadrant_chart, [])).faces == frozenset()
    assert corner_map(product_map, corner_at(quadrant_chart, ["x"])).faces == frozenset({"x"})
    assert corner_map(product_map, corner_at(quadrant_chart, ["x", "y"])).faces == frozenset({"x"})


def test_corner_map_of_projection(projection_map, quadrant_chart):
    """Test the face y = 0 stays interior"""
    image = corner_map(projection_map, corner_at(quadrant_chart, ["y"]))
    assert image.faces == frozenset()
    assert image.depth == 0


def test_corner_functor_respects_composition(product_map, square_map, quadrant_chart):
    """Test C(g o f) = C(g) o C(f)"""
    gf = compose(product_map, square_map)
    for gamma in all_corners(quadrant_chart):
        assert corner_map(gf, gamma).faces == corner_map(square_map, corner_map(product_map, gamma)).faces


@settings(max_examples=20, deadline=None)
@given(monomial_columns, monomial_columns)
def test_corner_functor_on_monomial_maps(f_columns, g_columns):
    """Test C(g o f) = C(g) o C(f) and A(g o f) = A(f) A(g) for monomial maps of the quadrant"""
    f = monomial_map(f_columns, "f")
    g = monomial_map(g_columns, "g")
    gf = compose(f, g)
    assert exponent_matrix(gf) == matmul(exponent_matrix(f), exponent_matrix(g))
    for gamma in all_corners(f.source):
        assert corner_map(gf, gamma).faces == corner_map(g, corner_map(f, gamma)).faces


def test_corner_at_rejects_interior_coordinate(quadrant_chart):
    """Test only boundary coordinates name corners"""
    with pytest.raises(DomainError):
        corner_at(quadrant_chart, ["z"])


def test_compose_needs_matching_coordinates(product_map, quadrant_chart):
    """Test composition checks the middle chart"""
    with pytest.raises(DomainError):
        compose(product_map, ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["x", "y"]))


# ===== Atlases =====


def test_corner_counts_of_models():
    """Test corner strata of the model spaces"""
    assert corner_counts(half_line()) == {0: 1, 1: 1}
    assert corner_counts(quadrant()) == {0: 1, 1: 2, 2: 1}
    assert corner_counts(interval()) == {0: 1, 1: 2}
    assert corner_counts(circle()) == {0: 1, 1: 0}


def test_boundary_counts_are_ordered():
    """Test the 2-fold boundary of the quadrant counts both orders"""
    assert boundary_counts(quadrant(), 2) == 2
    assert boundary_counts(quadrant(), 1) == 2


@pytest.mark.parametrize(
    "left, right",
    [(quadrant, interval), (interval, interval), (half_line, circle)],
)
def test_product_corner_counts_convolve(left, right):
    """Test corners of a product are products of corners"""
    a, b = left(), right()
    assert corner_counts(product_atlas(a, b)) == convolution(corner_counts(a), corner_counts(b))


def test_interval_has_two_labelled_endpoints():
    """Test the flip transition does not glue the endpoints"""
    components = boundary_components(interval())
    assert sorted(c.label for c in components) == ["0", "1"]
    assert faces_embedded(interval())


def test_quotient_cylinder_glues_one_face():
    """Test both chart faces form one boundary circle"""
    (component,) = boundary_components(quotient_cylinder(2))
    assert set(component.members) == {"A:x", "B:x"}
    assert component.label == "x=0"


def test_transitions_are_coherent():
    """Test round trips and triple overlaps of the model atlases"""
    for atlas in (interval(), circle(), quotient_cylinder(2)):
        check = check_transitions(atlas)
        assert check.round_trip < 1e-10
        assert check.cocycle < 1e-10


def test_boundary_atlas_of_cylinder():
    """Test the boundary of the cylinder is covered by two arcs"""
    boundary = boundary_atlas(quotient_cylinder(1))
    assert sorted(c.id for c in boundary.charts) == ["A|x", "B|x"]
    assert len(boundary.transitions) == 2
    assert boundary.dimension == 1
