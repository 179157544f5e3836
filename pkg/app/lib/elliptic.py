"""
Weighted Fredholm analysis of scalar b-operators on the interval [0, 1], and
b-de Rham cohomology of the model spaces.

Operators are P = sum_j c_j v^j with v = x(1-x) d/dx. In the cylinder
coordinate t = log(x/(1-x)) the field v is d/dt, and the weight x^l0 (1-x)^l1
conjugates P into sum_j c_j (d/dt + rho')^j with rho' = l0(1-x) - l1 x.
Weights use the growth convention: positive weights ask for decay.
"""
import asyncio
import csv
import functools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from numpy.polynomial import Polynomial
from scipy import integrate, linalg
from scipy.special import binom, expit

from .env import env_loader, settings_cache
from .errors import DomainError, NotElliptic, NotFredholm
from .expr import BExpr, SmoothnessClass, boundary_symbol, classify_function, const, parse
from .spectral import cheb, first_kind_points, fourier_diff, resample_matrix, svd_rank

logger = logging.getLogger(__name__)

FREDHOLM_TOLERANCE = 1e-9
SWEEP_MARGIN = 1e-3
BISECTION_WIDTH = 5e-4
INCLUSION_TOLERANCE = 1e-6
ROOT_MERGE = 1e-9
CIRCLE_GRID = 65
ELLIPTIC_SAMPLES = 257
ONE_FORM_SAMPLES = ("1", "x", "(pow x 2)", "(* x (+ 1 (* -1 x)))", "(exp x)")

_X = boundary_symbol("x")
_U = boundary_symbol("u")
_S = sp.Symbol("s")
_L0, _L1 = sp.symbols("l0 l1", real=True)

Weights = Tuple[float, float]


def _v(expr: sp.Expr) -> sp.Expr:
    return sp.expand(_X * (1 - _X) * sp.diff(expr, _X))


@dataclass(frozen=True)
class BOperator1D:
    coeffs: Tuple[BExpr, ...]
    id: str = "P"

    def __post_init__(self):
        coeffs = tuple(c if isinstance(c, BExpr) else const(c) for c in self.coeffs)
        if len(coeffs) < 2:
            raise DomainError("operator order must be at least 1", operator=self.id)
        for c in coeffs:
            if c.boundary != ("x",) or c.interior:
                raise DomainError("coefficients must be functions of x alone", operator=self.id)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_texts(cls, texts: Sequence[str], id: str = "P") -> "BOperator1D":
        return cls(tuple(parse(t) for t in texts), id)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def face_value(self, j: int, face: int) -> sp.Expr:
        return face_value(self.coeffs[j], face)

    def as_dict(self) -> dict:
        return {"id": self.id, "order": self.order, "coeffs": [c.to_sexpr() for c in self.coeffs]}


def _at_far_face(c: BExpr) -> BExpr:
    """c in the coordinate u = 1 - x of the face {x = 1}"""
    return c.subs({"x": 1 - _U}, target=const(0, boundary=("u",)))


def face_value(c: BExpr, face: int) -> sp.Expr:
    """Value at x = 0 or x = 1, exact whenever the face limit is"""
    if face == 0:
        return c.restrict("x").expr
    return _at_far_face(c).restrict("u").expr


def b_vector_field() -> BOperator1D:
    return BOperator1D((const(0), const(1)), id="v")


@settings_cache(maxsize=256)
def require_elliptic(P: BOperator1D, order: Optional[int] = None) -> None:
    """Raise unless the top coefficient never vanishes and every coefficient is a-smooth at both faces"""
    for j, c in enumerate(P.coeffs):
        for face, local in ((0, c), (1, _at_far_face(c))):
            verdict = classify_function(local, order).verdict
            if verdict is not SmoothnessClass.ASmooth:
                raise DomainError(
                    f"coefficient is {verdict.value} at the face", operator=P.id, coefficient=j, face=face
                )
    top = P.coeffs[-1]
    interior = np.linspace(0.0, 1.0, ELLIPTIC_SAMPLES)[1:-1]
    values = np.array([top.evaluate([x]) for x in interior])
    values = np.concatenate([values, [float(P.face_value(P.order, 0)), float(P.face_value(P.order, 1))]])
    if np.any(np.abs(values) < 1e-12) or not (np.all(values > 0) or np.all(values < 0)):
        raise NotElliptic("leading coefficient vanishes on [0, 1]", operator=P.id)


# ----- indicial data -----


def indicial_polynomial(P: BOperator1D, face: int) -> sp.Poly:
    """sum_j c_j(0) s^j at x = 0; sum_j c_j(1) (-s)^j in the coordinate u = 1 - x"""
    if face not in (0, 1):
        raise DomainError("face must be 0 or 1", operator=P.id, face=face)
    require_elliptic(P)
    sign = 1 if face == 0 else -1
    total = sum((P.face_value(j, face) * (sign * _S) ** j for j in range(P.order + 1)), sp.Integer(0))
    return sp.Poly(sp.expand(total), _S)


def indicial_roots(P: BOperator1D, face: int) -> List[complex]:
    poly = indicial_polynomial(P, face)
    roots: List[complex] = []
    if poly.degree() <= 2:
        exact = sp.roots(poly, multiple=True)
        if len(exact) == poly.degree():
            roots = [complex(sp.N(r, 30)) for r in exact]
    if not roots and poly.degree() > 0:
        roots = list(np.roots([complex(sp.N(c)) for c in poly.all_coeffs()]))
    return sorted(roots, key=lambda r: (round(r.real, 12), round(r.imag, 12)))


def _merge(values: Sequence[float]) -> Tuple[float, ...]:
    out: List[float] = []
    for value in sorted(values):
        if not out or value - out[-1] > ROOT_MERGE:
            out.append(value)
    return tuple(out)


@settings_cache(maxsize=256)
def excluded_weights(P: BOperator1D) -> Dict[int, Tuple[float, ...]]:
    return {face: _merge([r.real for r in indicial_roots(P, face)]) for face in (0, 1)}


def weight_distance(P: BOperator1D, weights: Weights) -> float:
    excluded = excluded_weights(P)
    return min(
        (abs(lam - d) for face, lam in enumerate(weights) for d in excluded[face]),
        default=math.inf,
    )


# ----- formal adjoint and conjugation -----


def formal_adjoint(P: BOperator1D) -> BOperator1D:
    """Adjoint for the b-density dx/(x(1-x)), where v* = -v"""
    derived = []
    for c in P.coeffs:
        chain = [c.expr]
        for _ in range(P.order):
            chain.append(_v(chain[-1]))
        derived.append(chain)
    coeffs = []
    for k in range(P.order + 1):
        total = sum(
            ((-1) ** j * int(binom(j, k)) * derived[j][j - k] for j in range(k, P.order + 1)),
            sp.Integer(0),
        )
        coeffs.append(P.coeffs[k].with_expr(sp.expand(total)))
    return BOperator1D(tuple(coeffs), id=f"{P.id}*")


@functools.lru_cache(maxsize=64)
def _conjugated(P: BOperator1D) -> Tuple[sp.Expr, ...]:
    rho = _L0 * (1 - _X) - _L1 * _X
    total = [sp.Integer(0)] * (P.order + 1)
    power: List[sp.Expr] = [sp.Integer(1)]
    for j, c in enumerate(P.coeffs):
        for k, a in enumerate(power):
            total[k] += c.expr * a
        if j < P.order:
            nxt = [sp.Integer(0)] * (len(power) + 1)
            for k, a in enumerate(power):
                nxt[k] += _v(a) + rho * a
                nxt[k + 1] += a
            power = [sp.expand(a) for a in nxt]
    return tuple(sp.expand(a) for a in total)


def conjugated_operator(P: BOperator1D, weights) -> BOperator1D:
    """x^-l0 (1-x)^-l1 P x^l0 (1-x)^l1, again a b-operator in v"""
    l0, l1 = (Fraction(str(w)) for w in _weights(weights))
    values = {_L0: sp.Rational(l0.numerator, l0.denominator), _L1: sp.Rational(l1.numerator, l1.denominator)}
    coeffs = tuple(P.coeffs[k].with_expr(sp.expand(a.xreplace(values))) for k, a in enumerate(_conjugated(P)))
    return BOperator1D(coeffs, id=f"{P.id}[{l0},{l1}]")


@functools.lru_cache(maxsize=64)
def _conjugated_numeric(P: BOperator1D):
    return tuple(sp.lambdify((_X, _L0, _L1), a, "numpy") for a in _conjugated(P))


def _limit_polynomial(P: BOperator1D, face: int, lam: float) -> Polynomial:
    """Symbol of the conjugated operator at t = -inf (face 0) or t = +inf (face 1)"""
    shift = Polynomial([lam, 1.0]) if face == 0 else Polynomial([-lam, 1.0])
    total = Polynomial([0.0])
    for j in range(P.order + 1):
        total = total + float(P.face_value(j, face)) * shift**j
    return total


# ----- weighted solve -----


def _weights(weights) -> Tuple:
    if isinstance(weights, (tuple, list)):
        if len(weights) != 2:
            raise DomainError("one weight per face is required", weights=weights)
        return tuple(weights)
    return weights, weights


def _truncation(distance: float) -> float:
    base = env_loader.BCALC_TRUNC
    return float(max(base, min(4 * base, 10.0 / distance)))


@functools.lru_cache(maxsize=16)
def _collocation(n: int, l: int) -> Tuple[np.ndarray, Tuple[np.ndarray, ...], np.ndarray]:
    s, d = cheb(n)
    powers = [np.eye(n)]
    for _ in range(l):
        powers.append(powers[-1] @ d)
    return s, tuple(powers), resample_matrix(s, first_kind_points(n - l))


def _boundary_rows(q: Polynomial, derivatives: Sequence[np.ndarray], end: int, keep: str, operator: str) -> np.ndarray:
    """Rows forcing the state at one end into the span of the decaying modes of q"""
    coef = q.coef
    l = len(derivatives)
    companion = np.zeros((l, l))
    companion[np.arange(l - 1), np.arange(1, l)] = 1.0
    companion[-1, :] = -coef[:l] / coef[l]
    eig = np.linalg.eigvals(companion)
    if np.any(np.abs(eig.real) < FREDHOLM_TOLERANCE):
        raise NotFredholm("limit operator has a purely oscillating mode", operator=operator)
    _, z, sdim = linalg.schur(companion, output="real", sort=keep)
    state = np.vstack([d[end, :] for d in derivatives])
    return z[:, sdim:].T @ state


@dataclass(frozen=True, eq=False)
class WeightedSolve:
    operator: str
    weights: Weights
    grid: int
    trunc: float
    rows: int
    ker: int
    coker: int
    smallest: float
    near_threshold: bool
    t: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)

    @property
    def index(self) -> int:
        return self.ker - self.coker

    def kernel_basis(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sample points x and one row per kernel element of the conjugated operator"""
        return expit(self.t), self.kernel

    def as_dict(self) -> dict:
        return {
            "operator": self.operator,
            "weights": list(self.weights),
            "grid": self.grid,
            "trunc": self.trunc,
            "ker": self.ker,
            "coker": self.coker,
            "index": self.index,
            "smallest_singular_value": self.smallest,
            "near_threshold": self.near_threshold,
        }


def solve_weighted(
    P: BOperator1D, weights, grid: Optional[int] = None, trunc: Optional[float] = None
) -> WeightedSolve:
    """Kernel and cokernel of P between weighted L2 spaces, by rectangular Chebyshev collocation"""
    lam0, lam1 = (float(w) for w in _weights(weights))
    require_elliptic(P)
    distance = weight_distance(P, (lam0, lam1))
    if distance < FREDHOLM_TOLERANCE:
        raise NotFredholm("weight is an excluded value", operator=P.id, weights=(lam0, lam1))
    n = grid or env_loader.BCALC_GRID
    l = P.order
    if n < 2 * l + 2:
        raise DomainError("grid too small for the operator order", grid=n, order=l)
    T = float(trunc) if trunc is not None else _truncation(distance)

    s, powers, resample = _collocation(n, l)
    t = T * s
    derivatives = [p / T**k for k, p in enumerate(powers)]
    x = expit(t)
    left, right = _limit_polynomial(P, 0, lam0), _limit_polynomial(P, 1, lam1)
    operator = np.zeros((n, n))
    with np.errstate(all="ignore"):
        for k, f in enumerate(_conjugated_numeric(P)):
            values = np.broadcast_to(np.asarray(f(x, lam0, lam1), dtype=float), t.shape).copy()
            bad = ~np.isfinite(values)
            values[bad] = np.where(t[bad] < 0, left.coef[k], right.coef[k])
            operator += values[:, None] * derivatives[k]

    matrix = np.vstack(
        [
            resample @ operator,
            _boundary_rows(left, derivatives[:l], 0, "rhp", P.id),
            _boundary_rows(right, derivatives[:l], -1, "lhp", P.id),
        ]
    )
    matrix = matrix / np.abs(matrix).max(axis=1, keepdims=True)
    _, singular, vh = linalg.svd(matrix)
    decision = svd_rank(singular, P.id)
    ker = n - decision.rank
    coker = matrix.shape[0] - decision.rank
    logger.debug("%s at %s: ker %d coker %d (T=%g, N=%d)", P.id, (lam0, lam1), ker, coker, T, n)
    return WeightedSolve(
        P.id,
        (lam0, lam1),
        n,
        T,
        matrix.shape[0],
        ker,
        coker,
        decision.smallest,
        decision.near_threshold,
        t,
        vh[decision.rank :],
    )


def kernel_inclusion(
    P: BOperator1D, high, low, grid: Optional[int] = None, trunc: Optional[float] = None
) -> float:
    """Worst relative residual of kernel(high) projected onto kernel(low), for high >= low"""
    hi, lo = _weights(high), _weights(low)
    if any(float(a) < float(b) for a, b in zip(hi, lo)):
        raise DomainError("kernel inclusion needs high >= low on every face", high=hi, low=lo)
    T = env_loader.BCALC_TRUNC if trunc is None else trunc
    upper = solve_weighted(P, hi, grid, T)
    lower = solve_weighted(P, lo, grid, T)
    if upper.ker == 0:
        return 0.0
    if lower.ker == 0:
        return 1.0
    log_x = -np.logaddexp(0.0, -upper.t)
    log_1mx = -np.logaddexp(0.0, upper.t)
    shift = (float(hi[0]) - float(lo[0])) * log_x + (float(hi[1]) - float(lo[1])) * log_1mx
    worst = 0.0
    for w in upper.kernel:
        moved = np.exp(shift) * w
        projected = lower.kernel.T @ (lower.kernel @ moved)
        worst = max(worst, float(np.linalg.norm(moved - projected) / np.linalg.norm(moved)))
    return worst


# ----- weight sweep -----


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    fredholm: bool
    ker: Optional[int] = None
    coker: Optional[int] = None

    @property
    def index(self) -> Optional[int]:
        return None if self.ker is None else self.ker - self.coker

    def row(self) -> dict:
        blank = lambda v: "" if v is None else v
        return {
            "lambda": self.lam,
            "fredholm": self.fredholm,
            "ker": blank(self.ker),
            "coker": blank(self.coker),
            "index": blank(self.index),
        }


@dataclass(frozen=True)
class IndexJump:
    below: float
    above: float
    size: int

    def as_dict(self) -> dict:
        return {"below": self.below, "above": self.above, "size": self.size}


@dataclass(frozen=True)
class WeightSweepReport:
    operator: str
    points: Tuple[SweepPoint, ...] = ()
    detected: Dict[int, Tuple[float, ...]] = field(default_factory=lambda: {0: (), 1: ()})
    predicted: Dict[int, Tuple[float, ...]] = field(default_factory=lambda: {0: (), 1: ()})
    jumps: Tuple[IndexJump, ...] = ()

    CSV_COLUMNS = ("lambda", "fredholm", "ker", "coker", "index")

    @property
    def fredholm_points(self) -> List[SweepPoint]:
        return [p for p in self.points if p.fredholm]

    def rows(self) -> List[dict]:
        return [p.row() for p in self.points]

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(self.CSV_COLUMNS))
            writer.writeheader()
            writer.writerows(self.rows())
        return path

    def as_dict(self) -> dict:
        return {
            "operator": self.operator,
            "points": self.rows(),
            "detected_excluded": {str(k): list(v) for k, v in self.detected.items()},
            "predicted_excluded": {str(k): list(v) for k, v in self.predicted.items()},
            "jumps": [j.as_dict() for j in self.jumps],
        }


async def _face_index(P: BOperator1D, face: int, value: float, hold: float, grid, trunc) -> int:
    for nudge in (0.0, 1e-7, -1e-7):
        pair = (value + nudge, hold) if face == 0 else (hold, value + nudge)
        try:
            solved = await asyncio.to_thread(solve_weighted, P, pair, grid, trunc)
            return solved.index
        except NotFredholm:
            continue
    raise NotFredholm("could not step off an excluded weight", operator=P.id, weight=value)


async def _bisect(P: BOperator1D, face: int, a: float, b: float, grid, trunc) -> Optional[float]:
    hold = a
    base = await _face_index(P, face, a, hold, grid, trunc)
    if await _face_index(P, face, b, hold, grid, trunc) == base:
        return None
    while b - a > BISECTION_WIDTH:
        mid = (a + b) / 2
        if await _face_index(P, face, mid, hold, grid, trunc) == base:
            a = mid
        else:
            b = mid
    return (a + b) / 2


async def weight_sweep(
    P: BOperator1D, lo: float, hi: float, steps: int, grid: Optional[int] = None, trunc: Optional[float] = None
) -> WeightSweepReport:
    """Solve at equal weights on both faces across [lo, hi]; locate index jumps face by face"""
    predicted = excluded_weights(P)
    if steps <= 0 or hi < lo:
        return WeightSweepReport(P.id, predicted=predicted)
    grid_values = [float(lo)] if steps == 1 else [float(v) for v in np.linspace(lo, hi, steps)]
    # fill the caches before worker threads share them
    require_elliptic(P)
    _conjugated_numeric(P)
    _collocation(grid or env_loader.BCALC_GRID, P.order)

    async def solve_point(lam: float) -> SweepPoint:
        if any(abs(lam - d) < SWEEP_MARGIN for face in (0, 1) for d in predicted[face]):
            return SweepPoint(lam, False)
        solved = await asyncio.to_thread(solve_weighted, P, (lam, lam), grid, trunc)
        return SweepPoint(lam, True, solved.ker, solved.coker)

    points = await asyncio.gather(*(solve_point(lam) for lam in grid_values))
    fredholm = [p for p in points if p.fredholm]
    detected: Dict[int, List[float]] = {0: [], 1: []}
    jumps = []
    for below, above in zip(fredholm, fredholm[1:]):
        if below.index == above.index:
            continue
        jumps.append(IndexJump(below.lam, above.lam, below.index - above.index))
        for face in (0, 1):
            found = await _bisect(P, face, below.lam, above.lam, grid, trunc)
            if found is not None:
                detected[face].append(found)
    report = WeightSweepReport(
        P.id,
        tuple(points),
        {face: tuple(v) for face, v in detected.items()},
        predicted,
        tuple(jumps),
    )
    logger.info("sweep of %s: %d points, %d jumps", P.id, len(points), len(jumps))
    return report


# ----- cohomology -----


def bdr_class(c: BExpr) -> Tuple[float, float]:
    """Class of the b-form c(x) dx/(x(1-x)) in bH^1 of [0, 1], read off as (c(0), c(1))"""
    return float(face_value(c, 0)), float(face_value(c, 1))


def bdr_primitive(c: BExpr, x: float) -> float:
    """Primitive of c ds/(s(1-s)) normalised to vanish at 1/2"""
    if not 0.0 < x < 1.0:
        raise DomainError("primitive is evaluated inside (0, 1)", x=x)
    f = sp.lambdify(_X, c.expr / (_X * (1 - _X)), "math")
    value, _ = integrate.quad(f, 0.5, x, epsabs=1e-13, epsrel=1e-12)
    return value


def bdr_interval(grid: Optional[int] = None) -> Tuple[int, int]:
    """(dim bH^0, dim bH^1) of [0, 1]"""
    h0 = solve_weighted(b_vector_field(), (-0.25, -0.25), grid).ker
    classes = np.array([bdr_class(parse(text)) for text in ONE_FORM_SAMPLES])
    h1 = int(np.linalg.matrix_rank(classes))
    return h0, h1


@dataclass(frozen=True)
class CircleCohomology:
    holonomy: float
    h0: int
    h1: int
    smallest: float

    @property
    def dims(self) -> Tuple[int, int]:
        return self.h0, self.h1

    def as_dict(self) -> dict:
        return {"holonomy": self.holonomy, "dims": list(self.dims), "smallest_singular_value": self.smallest}


def twisted_circle_cohomology(h, grid: int = CIRCLE_GRID) -> CircleCohomology:
    """Cohomology of the flat line bundle with holonomy h on the circle"""
    h = float(h)
    if not h > 0:
        raise DomainError("holonomy must be positive", holonomy=h)
    _, d = fourier_diff(grid)
    kappa = math.log(h) / (2 * math.pi)
    singular = linalg.svd(d - kappa * np.eye(grid), compute_uv=False)
    decision = svd_rank(singular, "twisted d")
    dim = grid - decision.rank
    return CircleCohomology(h, dim, dim, decision.smallest)


@dataclass(frozen=True)
class QuotientCohomology:
    alpha: float
    dims: Tuple[int, int, int]
    prediction: bool = True

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "dims": list(self.dims), "prediction": self.prediction}


def predicted_quotient_cohomology(alpha) -> QuotientCohomology:
    """Long exact sequence from H*(X) = (1, 1, 0) and the twisted boundary circle of holonomy alpha"""
    a = float(alpha)
    if not a > 0:
        raise DomainError("alpha must be positive", alpha=a)
    boundary = twisted_circle_cohomology(a)
    interior = (1, 1, 0)
    dims = (interior[0], interior[1] + boundary.h0, interior[2] + boundary.h1)
    return QuotientCohomology(a, dims)
