import numpy as np
import pytest

from lib.atlas import Chart, ChartedMap, classify_map, compose
from lib.btangent import BVectorField, b_jacobian, b_lie_bracket, is_b_fibration, is_b_submersion
from lib.errors import DomainError, NotInterior

# ===== b-Jacobians =====


def test_b_jacobian_of_product(product_map):
    """Test bT of (x, y) -> xy sends both b-normals to the target b-normal"""
    assert b_jacobian(product_map).as_lists() == [["1", "1"]]


def test_b_jacobian_of_projection(projection_map):
    assert b_jacobian(projection_map).as_lists() == [["1", "0"]]


def test_b_jacobian_evaluates(quadrant_chart):
    """Test the entry y of (x, x e^y) on the face y = 0"""
    f = ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["x", "(* x (exp y))"], id="skew")
    matrix = b_jacobian(f).evaluate([0.5, 0.25])
    assert matrix.tolist() == pytest.approx([[1.0, 0.0], [1.0, 0.25]])


def test_b_jacobian_needs_interior_map(quadrant_chart, half_line_chart):
    f = ChartedMap.from_texts(quadrant_chart, half_line_chart, ["0"], id="zero")
    with pytest.raises(NotInterior):
        b_jacobian(f)


def test_b_jacobian_chain_rule(quadrant_chart):
    """Test bJ(g o f) = bJ(g) at f times bJ(f) on random interior points"""
    f = ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["(pow x 2)", "(* y (exp x))"], id="f")
    g = ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["(* x (pow y 2))", "(* y (+ 1 x))"], id="g")
    points = np.random.default_rng(0).uniform(0.05, 0.95, size=(100, 2))
    composite = b_jacobian(compose(f, g)).evaluate_many(points)
    outer = b_jacobian(g).evaluate_many(f.evaluate_many(points))
    chained = np.einsum("pjk,pki->pji", outer, b_jacobian(f).evaluate_many(points))
    assert np.abs(composite - chained).max() < 1e-9


def test_b_jacobian_with_interior_variable():
    """Test (w, w e^x) with x interior has b-Jacobian [[1, 0], [1, 1]]"""
    source = Chart("S", ("w", "x"), 1, ((0, 1), (-1, 1)))
    target = Chart("Q", ("x", "y"), 2, ((0, 1), (0, 3)))
    f = ChartedMap.from_texts(source, target, ["w", "(* w (exp x))"], id="g")
    assert b_jacobian(f).evaluate([0.3, 0.5]).tolist() == pytest.approx([[1.0, 0.0], [1.0, 1.0]])
    assert not classify_map(f).b_normal


# ===== b-submersions and b-fibrations =====


def test_product_is_b_fibration(product_map):
    """Test the standard b-fibration"""
    assert is_b_submersion(product_map).surjective
    assert is_b_fibration(product_map)


def test_projection_is_b_fibration(projection_map):
    assert is_b_fibration(projection_map)


def test_b_submersion_that_is_not_b_normal(quadrant_chart):
    """Test (x, y) -> (x, xy) is a b-submersion but sends the face x = 0 into the corner"""
    f = ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["x", "(* x y)"], id="blowdown")
    assert is_b_submersion(f).surjective
    assert not is_b_fibration(f)


def test_rank_drops_on_a_face(quadrant_chart):
    """Test (x, x e^y) loses b-rank where y = 0"""
    f = ChartedMap.from_texts(quadrant_chart, quadrant_chart, ["x", "(* x (exp y))"], id="skew")
    check = is_b_submersion(f)
    assert not check.surjective
    assert check.worst_ratio < 1e-8


# ===== b-vector fields =====


def test_frame_fields_commute(quadrant_chart):
    """Test [x d/dx, y d/dy] = 0"""
    u = BVectorField.from_texts(quadrant_chart, ["1", "0"], "u")
    v = BVectorField.from_texts(quadrant_chart, ["0", "1"], "v")
    assert b_lie_bracket(u, v).is_zero()


def test_bracket_components(quadrant_chart):
    """Test [x d/dx, y x d/dx + x y d/dy] in the b-frame"""
    u = BVectorField.from_texts(quadrant_chart, ["1", "0"], "u")
    w = BVectorField.from_texts(quadrant_chart, ["y", "x"], "w")
    bracket = b_lie_bracket(u, w)
    assert bracket.as_dict()["coeffs"] == ["0", "x"]
    assert b_lie_bracket(u, w).certify() == []


def test_bracket_is_antisymmetric(quadrant_chart):
    u = BVectorField.from_texts(quadrant_chart, ["(pow x 1/2)", "y"], "u")
    w = BVectorField.from_texts(quadrant_chart, ["(exp y)", "(* x y)"], "w")
    uw, wu = b_lie_bracket(u, w), b_lie_bracket(w, u)
    assert all((a + b).is_zero() for a, b in zip(uw.coeffs, wu.coeffs))


def test_certify_flags_non_a_smooth_coefficients(quadrant_chart):
    """Test a coefficient 1/log x is not allowed"""
    u = BVectorField.from_texts(quadrant_chart, ["(/ 1 (log x))", "1"], "u")
    assert u.certify() == ["x"]


def test_vector_fields_need_matching_dimension(quadrant_chart, half_line_chart):
    with pytest.raises(DomainError):
        BVectorField.from_texts(quadrant_chart, ["1"], "u")
    u = BVectorField.from_texts(quadrant_chart, ["1", "0"], "u")
    v = BVectorField.from_texts(half_line_chart, ["1"], "v")
    with pytest.raises(DomainError):
        b_lie_bracket(u, v)


def test_bracket_satisfies_jacobi_identity(quadrant_chart):
    """Test [u, [v, w]] + [v, [w, u]] + [w, [u, v]] = 0"""
    u = BVectorField.from_texts(quadrant_chart, ["x", "(pow y 2)"], "u")
    v = BVectorField.from_texts(quadrant_chart, ["(exp y)", "(* x y)"], "v")
    w = BVectorField.from_texts(quadrant_chart, ["(* (pow x 1/2) y)", "1"], "w")
    terms = [b_lie_bracket(a, b_lie_bracket(b, c)) for a, b, c in ((u, v, w), (v, w, u), (w, u, v))]
    total = [first + second + third for first, second, third in zip(*(t.coeffs for t in terms))]
    assert all(c.is_zero() for c in total)
    for point in ([0.2, 0.7], [0.9, 0.1]):
        assert max(abs(c.evaluate(point)) for c in total) < 1e-12
