import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from lib import env_loader
from lib.elliptic import (
    INCLUSION_TOLERANCE,
    BOperator1D,
    b_vector_field,
    bdr_interval,
    bdr_primitive,
    conjugated_operator,
    excluded_weights,
    formal_adjoint,
    indicial_roots,
    kernel_inclusion,
    predicted_quotient_cohomology,
    require_elliptic,
    solve_weighted,
    twisted_circle_cohomology,
    weight_distance,
    weight_sweep,
)
from lib.errors import DiscretizationUnstable, DomainError, NotElliptic, NotFredholm
from lib.expr import parse
from lib.spectral import cheb, fourier_diff, svd_rank

# ===== Helper Functions =====


def shifted_square() -> BOperator1D:
    """v^2 - 1, excluded weights at -1 and 1 on both faces"""
    return BOperator1D.from_texts(["-1", "0", "1"], "v2m1")


# ===== Ellipticity and indicial data =====


def test_b_vector_field_is_elliptic():
    require_elliptic(b_vector_field())


def test_vanishing_top_coefficient_is_not_elliptic():
    """Test x v degenerates at x = 0"""
    with pytest.raises(NotElliptic):
        require_elliptic(BOperator1D.from_texts(["0", "x"], "xv"))


def test_coefficients_must_be_a_smooth():
    """Test 1/log x is refused as a coefficient"""
    with pytest.raises(DomainError):
        require_elliptic(BOperator1D.from_texts(["(/ 1 (log x))", "1"], "bad"))


def test_operator_needs_order_one():
    with pytest.raises(DomainError):
        BOperator1D.from_texts(["1"], "c")



def test_reload_forgets_ellipticity_checks(monkeypatch):
    """Test a check cached under one order is redone after the settings reload"""
    require_elliptic(shifted_square())
    excluded_weights(shifted_square())
    assert require_elliptic.cache_info().currsize > 0
    monkeypatch.setenv("BCALC_ORDER", "2")
    env_loader.reload()
    assert require_elliptic.cache_info().currsize == 0
    assert excluded_weights.cache_info().currsize == 0

def test_indicial_roots():
    """Test v has root 0 and v^2 - 1 has roots -1, 1 at both faces"""
    for face in (0, 1):
        assert indicial_roots(b_vector_field(), face) == [pytest.approx(0)]
        roots = indicial_roots(shifted_square(), face)
        assert [r.real for r in roots] == pytest.approx([-1.0, 1.0])
    with pytest.raises(DomainError):
        indicial_roots(b_vector_field(), 2)


def test_excluded_weights():
    assert excluded_weights(b_vector_field()) == {0: pytest.approx((0.0,)), 1: pytest.approx((0.0,))}
    excluded = excluded_weights(shifted_square())
    assert excluded[0] == pytest.approx((-1.0, 1.0))
    assert excluded[1] == pytest.approx((-1.0, 1.0))
    assert weight_distance(b_vector_field(), (0.5, -0.25)) == pytest.approx(0.25)


# ===== Adjoint and conjugation =====


def test_adjoint_of_v_is_minus_v():
    """Test v* = -v for the b-density"""
    adjoint = formal_adjoint(b_vector_field())
    assert adjoint.id == "v*"
    assert [c.evaluate([0.5]) for c in adjoint.coeffs] == pytest.approx([0.0, -1.0])


def test_v_squared_minus_one_is_self_adjoint():
    adjoint = formal_adjoint(shifted_square())
    assert [c.evaluate([0.3]) for c in adjoint.coeffs] == pytest.approx([-1.0, 0.0, 1.0])


def test_conjugated_operator():
    """Test x^-l (1-x)^-l v x^l (1-x)^l = v + l(1 - 2x)"""
    conjugated = conjugated_operator(b_vector_field(), (Fraction(1, 2), Fraction(1, 2)))
    assert conjugated.coeffs[0].evaluate([0.25]) == pytest.approx(0.25)
    assert conjugated.coeffs[1].evaluate([0.25]) == pytest.approx(1.0)


# ===== Weighted solves =====


@pytest.mark.parametrize(
    "weight, expected",
    [(0.5, (0, 1, -1)), (-0.5, (1, 0, 1))],
)
def test_solve_b_vector_field(weight, expected):
    """Test constants are in the kernel only when growth is allowed"""
    solved = solve_weighted(b_vector_field(), (weight, weight))
    assert (solved.ker, solved.coker, solved.index) == expected
    assert solved.as_dict()["index"] == expected[2]


@pytest.mark.parametrize("weight, index", [(-1.5, 2), (0.0, 0), (1.5, -2)])
def test_solve_shifted_square(weight, index):
    assert solve_weighted(shifted_square(), (weight, weight)).index == index


def test_kernel_basis_is_the_conjugated_constant():
    """Test the kernel at weight -1/2 is (x(1-x))^(1/2) after conjugation"""
    solved = solve_weighted(b_vector_field(), (-0.5, -0.5))
    x, kernel = solved.kernel_basis()
    assert kernel.shape == (1, solved.grid)
    middle = np.abs(solved.t) < 5
    ratio = kernel[0][middle] / np.sqrt(x[middle] * (1 - x[middle]))
    assert np.ptp(ratio) < 1e-4 * np.abs(ratio).mean()


def test_excluded_weight_is_not_fredholm():
    with pytest.raises(NotFredholm):
        solve_weighted(b_vector_field(), (0.0, 0.0))


def test_solve_needs_one_weight_per_face():
    with pytest.raises(DomainError):
        solve_weighted(b_vector_field(), (0.5, 0.5, 0.5))


def test_index_duality():
    """Test ind P at lambda equals minus ind P* at -lambda"""
    for P in (b_vector_field(), shifted_square()):
        adjoint = formal_adjoint(P)
        for lam in (-1.5, -0.5, 0.5, 1.5):
            if weight_distance(P, (lam, lam)) < 0.25:
                continue
            assert solve_weighted(P, (lam, lam)).index == -solve_weighted(adjoint, (-lam, -lam)).index


def test_kernel_inclusion():
    """Test the constant kernel at weight -1/2 lies in the kernel at -3/4"""
    residual = kernel_inclusion(b_vector_field(), (-0.5, -0.5), (-0.75, -0.75))
    assert residual < INCLUSION_TOLERANCE


def test_kernel_inclusion_needs_ordered_weights():
    with pytest.raises(DomainError):
        kernel_inclusion(b_vector_field(), (-0.75, -0.75), (-0.5, -0.5))



@pytest.mark.parametrize("weight", [-1.5, -0.5, 0.5, 1.5])
def test_dimensions_survive_grid_doubling(weight):
    """Test ker and coker agree on N and 2N collocation points"""
    for P in (b_vector_field(), shifted_square()):
        coarse = solve_weighted(P, (weight, weight), grid=128)
        fine = solve_weighted(P, (weight, weight), grid=256)
        assert (coarse.ker, coarse.coker) == (fine.ker, fine.coker)


def test_kernels_shrink_along_the_sweep():
    """Test each kernel at a larger weight lies in the kernel at the next smaller weight"""
    lams = [-1.0, -0.75, -0.5, -0.25]
    for low, high in zip(lams, lams[1:]):
        assert kernel_inclusion(b_vector_field(), high, low) < INCLUSION_TOLERANCE
    assert kernel_inclusion(b_vector_field(), 0.5, -0.5) == 0.0

# ===== Weight sweep =====


@pytest.mark.asyncio
async def test_sweep_of_b_vector_field():
    """Test the index drops by 2 across the excluded weight 0"""
    report = await weight_sweep(b_vector_field(), -1.0, 1.0, 9)
    assert len(report.points) == 9
    zero = [p for p in report.points if abs(p.lam) < 1e-12]
    assert zero and not zero[0].fredholm
    assert all(p.index == 1 for p in report.fredholm_points if p.lam < 0)
    assert all(p.index == -1 for p in report.fredholm_points if p.lam > 0)
    (jump,) = report.jumps
    assert jump.size == 2
    for face in (0, 1):
        (found,) = report.detected[face]
        assert abs(found) < 1e-3



@pytest.mark.asyncio
async def test_sweep_of_shifted_square():
    """Test v^2 - 1 jumps by 2 at -1 and at 1, each face seeing both"""
    report = await weight_sweep(shifted_square(), -2.0, 2.0, 17)
    assert len(report.points) == 17
    assert [p.lam for p in report.points if not p.fredholm] == pytest.approx([-1.0, 1.0])
    assert [j.size for j in report.jumps] == [2, 2]
    for face in (0, 1):
        assert report.detected[face] == pytest.approx((-1.0, 1.0), abs=1e-3)
    kernels = [p.ker for p in report.fredholm_points]
    assert kernels == sorted(kernels, reverse=True)

@pytest.mark.asyncio
async def test_empty_sweep():
    report = await weight_sweep(b_vector_field(), 1.0, -1.0, 5)
    assert report.points == ()
    assert report.predicted[0] == pytest.approx((0.0,))


@pytest.mark.asyncio
async def test_sweep_table(tmp_path):
    """Test the CSV leaves non-Fredholm rows blank"""
    report = await weight_sweep(b_vector_field(), -0.5, 0.5, 3)
    path = report.to_csv(tmp_path / "sweep.csv")
    with path.open() as handle:
        rows = list(csv.DictReader(handle))
    assert list(rows[0]) == ["lambda", "fredholm", "ker", "coker", "index"]
    assert rows[1]["fredholm"] == "False"
    assert rows[1]["index"] == ""
    assert rows[0]["index"] == "1"


# ===== b-de Rham cohomology =====


def test_interval_cohomology():
    """Test bH^0 = 1 and bH^1 = 2 on [0, 1]"""
    assert bdr_interval() == (1, 2)


def test_bdr_primitive():
    """Test the primitive of dx/(x(1-x)) is log(x/(1-x))"""
    assert bdr_primitive(parse("1"), 0.25) == pytest.approx(math.log(1 / 3))
    for x in (0.0, 1.0):
        with pytest.raises(DomainError):
            bdr_primitive(parse("1"), x)


@pytest.mark.parametrize("holonomy, dims", [(1, (1, 1)), (2, (0, 0)), (0.5, (0, 0))])
def test_twisted_circle(holonomy, dims):
    assert twisted_circle_cohomology(holonomy).dims == dims


def test_twisted_circle_needs_positive_holonomy():
    with pytest.raises(DomainError):
        twisted_circle_cohomology(0)


@pytest.mark.parametrize("alpha, dims", [(1, (1, 2, 1)), (2, (1, 1, 0))])
def test_quotient_cylinder_prediction(alpha, dims):
    result = predicted_quotient_cohomology(alpha)
    assert result.dims == dims
    assert result.prediction


# ===== Collocation helpers =====


def test_cheb_differentiates_polynomials():
    x, d = cheb(16)
    assert np.all(np.diff(x) > 0)
    assert d @ x**3 == pytest.approx(3 * x**2, abs=1e-9)


def test_fourier_diff_needs_odd_grid():
    theta, d = fourier_diff(9)
    assert d @ np.sin(theta) == pytest.approx(np.cos(theta), abs=1e-10)
    with pytest.raises(ValueError):
        fourier_diff(8)


def test_svd_rank_requires_a_gap():
    assert svd_rank(np.array([1.0, 0.5, 1e-14])).rank == 2
    with pytest.raises(DiscretizationUnstable):
        svd_rank(np.array([1.0, 1e-7, 1e-9]))
