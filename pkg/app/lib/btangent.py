"""
b-tangent calculus: b-Jacobians in b-frames, b-submersions and b-fibrations,
and the b-Lie bracket of b-vector fields.

Frames are (x_1 d/dx_1, ..., x_k d/dx_k, d/dx_(k+1), ...) on source and target.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from .atlas import Chart, ChartedMap, classify_map, factor_components, require_interior
from .errors import DomainError, FactorizationFailure
from .expr import BExpr, SmoothnessClass, b_derivative, classify_function, evaluate_many

logger = logging.getLogger(__name__)

RANK_THRESHOLD = 1e-8
WARNING_BAND = (1e-10, 1e-6)


@dataclass(frozen=True)
class BFrameMatrix:
    source: Chart
    target: Chart
    entries: Tuple[Tuple[BExpr, ...], ...]  # rows: target components, columns: source variables

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        out = np.zeros((len(points), self.target.m, self.source.m))
        for j, row in enumerate(self.entries):
            for i, entry in enumerate(row):
                out[:, j, i] = evaluate_many(entry, points)
        return out

    def evaluate(self, point: Sequence[float]) -> np.ndarray:
        return self.evaluate_many(np.asarray([point], dtype=float))[0]

    def as_lists(self) -> List[List[str]]:
        return [[e.to_sexpr() for e in row] for row in self.entries]


def b_jacobian(f: ChartedMap, certify: bool = True, order: Optional[int] = None) -> BFrameMatrix:
    """Matrix of bTf: entry (j, i) is f_j^-1 x_i df_j/dx_i for boundary j and i"""
    require_interior(f)
    factored = factor_components(f)
    src = f.source
    rows = []
    for j, comp in enumerate(f.components):
        row = []
        for i, name in enumerate(src.coords):
            s = comp.symbol(name)
            if j < f.target.k:
                F = factored[j].factor.expr
                ratio = sp.diff(F, s) / F
                if name in src.boundary:
                    a = factored[j].exponents[i]
                    entry = sp.Rational(a.numerator, a.denominator) + s * ratio
                else:
                    entry = ratio
            else:
                d = sp.diff(comp.expr, s)
                entry = s * d if name in src.boundary else d
            row.append(comp.with_expr(sp.simplify(entry)))
        rows.append(tuple(row))
    if certify:
        for j, row in enumerate(rows):
            for i, entry in enumerate(row):
                verdict = classify_function(entry, order).verdict
                if verdict is not SmoothnessClass.ASmooth:
                    raise FactorizationFailure(
                        f"b-Jacobian entry is {verdict.value}", map=f.id, row=j, column=i
                    )
    return BFrameMatrix(src, f.target, tuple(rows))


@dataclass(frozen=True)
class RankCheck:
    surjective: bool
    warning: bool
    worst_ratio: float
    samples: int

    def __bool__(self) -> bool:
        return self.surjective

    def as_dict(self) -> dict:
        return {
            "surjective": self.surjective,
            "warning": self.warning,
            "worst_ratio": self.worst_ratio,
            "samples": self.samples,
        }


def is_b_submersion(f: ChartedMap, samples: Optional[int] = None) -> RankCheck:
    """Full target rank of the b-Jacobian at sampled points, faces and corners included"""
    jacobian = b_jacobian(f)
    points = f.sample(samples, faces=True)
    n = f.target.m
    if n == 0:
        return RankCheck(True, False, 1.0, len(points))
    matrices = jacobian.evaluate_many(points)
    singular = np.linalg.svd(matrices, compute_uv=False)
    if singular.shape[-1] < n:
        return RankCheck(False, False, 0.0, len(points))
    top = singular[:, 0]
    ratios = np.where(top > 0, singular[:, n - 1] / np.where(top > 0, top, 1.0), 0.0)
    worst = float(ratios.min())
    warning = WARNING_BAND[0] <= worst <= WARNING_BAND[1]
    if warning:
        logger.warning("b-Jacobian of %s is near rank-deficient (ratio %.2e)", f.id, worst)
    return RankCheck(worst > RANK_THRESHOLD, warning, worst, len(points))


def is_b_fibration(f: ChartedMap, samples: Optional[int] = None) -> bool:
    flags = classify_map(f)
    require_interior(f)
    return flags.b_normal and bool(is_b_submersion(f, samples))


@dataclass(frozen=True)
class BVectorField:
    chart: Chart
    coeffs: Tuple[BExpr, ...]
    id: str = ""

    def __post_init__(self):
        if len(self.coeffs) != self.chart.m:
            raise DomainError("one coefficient per b-frame element is required", field=self.id)
        object.__setattr__(self, "coeffs", tuple(self.chart.bexpr(c) for c in self.coeffs))

    @classmethod
    def from_texts(cls, chart: Chart, texts: Sequence[str], id: str = "") -> "BVectorField":
        return cls(chart, tuple(chart.bexpr(t) for t in texts), id)

    def apply(self, g: BExpr) -> BExpr:
        g = self.chart.bexpr(g)
        total = sum((c.expr * b_derivative(g, i).expr for i, c in enumerate(self.coeffs)), sp.Integer(0))
        return g.with_expr(sp.expand(total))

    def certify(self, order: Optional[int] = None) -> List[str]:
        """Coefficients that fail to be a-smooth"""
        return [
            self.chart.coords[i]
            for i, c in enumerate(self.coeffs)
            if classify_function(c, order).verdict is not SmoothnessClass.ASmooth
        ]

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def as_dict(self) -> dict:
        return {"chart": self.chart.id, "coeffs": [c.to_sexpr() for c in self.coeffs]}


def b_lie_bracket(u: BVectorField, v: BVectorField) -> BVectorField:
    if u.chart != v.chart:
        raise DomainError("vector fields live on different charts", first=u.id, second=v.id)
    coeffs = []
    for i in range(u.chart.m):
        total = sp.Integer(0)
        for j in range(u.chart.m):
            total += u.coeffs[j].expr * b_derivative(v.coeffs[i], j).expr
            total -= v.coeffs[j].expr * b_derivative(u.coeffs[i], j).expr
        coeffs.append(u.coeffs[i].with_expr(sp.expand(total)))
    return BVectorField(u.chart, tuple(coeffs), id=f"[{u.id},{v.id}]")
