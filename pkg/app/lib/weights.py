"""
Flat b-normal connection on the boundary: holonomy, weights and the
transition data of the line bundles L_lambda.

A weight assigns lambda to every local face. Across a transition with
exponent matrix A the growth convention is lambda_i = sum_j a_ij lambda~_j.
"""
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import sympy as sp

from .atlas import Atlas, ChartedMap, Transition, _inside, boundary_components, classify_map, require_interior
from .errors import DomainError, NotADiffeo, NotBNormal, NotInterior, PositivityViolated, WeightInconsistent
from .expr import BExpr, evaluate_many, leading_behavior

logger = logging.getLogger(__name__)


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**9)
    return Fraction(str(value))


def _rational(value: Fraction) -> sp.Rational:
    return sp.Rational(value.numerator, value.denominator)


# ----- holonomy -----


@dataclass(frozen=True)
class _Edge:
    source: str
    target: str
    exponent: Fraction
    transition: str


def _face_edges(atlas: Atlas) -> List[_Edge]:
    edges = []
    for t in atlas.transitions:
        try:
            fmap = t.face_map()
        except NotADiffeo as err:
            raise err.with_context(atlas=atlas.name)
        matrix = classify_map(t.forward, t.inverse).exponent_matrix
        for src, tgt in fmap.items():
            i = t.source.faces.index(src)
            j = t.target.faces.index(tgt)
            edges.append(_Edge(src, tgt, matrix[i][j], t.id))
    # identity-like overlaps first so transport factors follow untwisted overlaps
    return sorted(edges, key=lambda e: e.exponent != 1)


@dataclass(frozen=True)
class ComponentHolonomy:
    component: str
    label: Optional[str]
    holonomy: Fraction
    twisted: bool
    cycle: Tuple[str, ...]
    scale: Tuple[Tuple[str, Fraction], ...]  # local face -> transport factor from the root face

    def as_dict(self) -> dict:
        return {
            "component": self.component,
            "label": self.label,
            "holonomy": self.holonomy,
            "twisted": self.twisted,
            "cycle": list(self.cycle),
        }


@dataclass(frozen=True)
class HolonomyReport:
    components: Tuple[ComponentHolonomy, ...]

    def __getitem__(self, key: str) -> ComponentHolonomy:
        for c in self.components:
            if key in (c.component, c.label):
                return c
        raise KeyError(key)

    def as_dict(self) -> dict:
        return {"components": [c.as_dict() for c in self.components]}


@dataclass(frozen=True)
class _Step:
    source: str
    target: str
    transition: str
    exponent: Fraction  # b-normal exponent in the direction of travel
    forward: bool

    def inverted(self) -> "_Step":
        return _Step(self.target, self.source, self.transition, 1 / self.exponent, not self.forward)


def _oriented(loop: List[_Step], order: Mapping[str, int]) -> List[_Step]:
    """Traverse most transitions forward; on a tie the earliest declared one goes forward"""
    forward = sum(s.forward for s in loop)
    flip = 2 * forward < len(loop)
    if 2 * forward == len(loop):
        first = min(loop, key=lambda s: order[s.transition])
        flip = not first.forward
    return [s.inverted() for s in reversed(loop)] if flip else loop


def boundary_holonomy(atlas: Atlas) -> HolonomyReport:
    """Holonomy of the flat b-normal connection around each boundary component"""
    edges = _face_edges(atlas)
    order = {t.id: n for n, t in enumerate(atlas.transitions)}
    adjacency: Dict[str, List[_Step]] = {f: [] for f in atlas.local_faces}
    for e in edges:
        step = _Step(e.source, e.target, e.transition, e.exponent, True)
        adjacency[e.source].append(step)
        adjacency[e.target].append(step.inverted())
    out = []
    for comp in boundary_components(atlas):
        root = comp.members[0]
        scale = {root: Fraction(1)}
        tree: Dict[str, List[_Step]] = {root: []}
        used = set()
        queue = deque([root])
        holonomy, cycle = Fraction(1), ()
        while queue:
            u = queue.popleft()
            for step in adjacency[u]:
                v = step.target
                key = (step.transition, frozenset((u, v)))
                if key in used:
                    continue
                used.add(key)
                if v not in scale:
                    scale[v] = scale[u] * step.exponent
                    tree[v] = tree[u] + [step]
                    queue.append(v)
                    continue
                if holonomy == 1 and scale[u] * step.exponent != scale[v]:
                    loop = _oriented(_closed_loop(tree[u], step, tree[v]), order)
                    holonomy = Fraction(1)
                    for s in loop:
                        holonomy /= s.exponent
                    cycle = tuple(s.transition for s in loop)
        twisted = holonomy != 1
        if twisted:
            logger.info("boundary component %s is twisted (holonomy %s)", comp.id, holonomy)
        out.append(
            ComponentHolonomy(comp.id, comp.label, holonomy, twisted, cycle, tuple(sorted(scale.items())))
        )
    return HolonomyReport(tuple(out))


def _closed_loop(to_u: List[_Step], closing: _Step, to_v: List[_Step]) -> List[_Step]:
    """root -> u -> v -> root with the shared tree prefix removed"""
    k = 0
    while k < min(len(to_u), len(to_v)) and to_u[k] == to_v[k]:
        k += 1
    return to_u[k:] + [closing] + [s.inverted() for s in reversed(to_v[k:])]


@dataclass(frozen=True)
class WeightSpace:
    dimension: int
    untwisted: Tuple[str, ...]
    twisted: Tuple[str, ...]

    def as_dict(self) -> dict:
        return {"dimension": self.dimension, "untwisted": list(self.untwisted), "twisted": list(self.twisted)}


def weight_space(atlas: Atlas) -> WeightSpace:
    report = boundary_holonomy(atlas)
    untwisted = tuple(c.label or c.component for c in report.components if not c.twisted)
    twisted = tuple(c.label or c.component for c in report.components if c.twisted)
    return WeightSpace(len(untwisted), untwisted, twisted)


# ----- weights -----


@dataclass(frozen=True)
class Weight:
    values: Tuple[Tuple[str, Fraction], ...]
    notes: Tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def of(cls, values: Mapping[str, object], notes=()) -> "Weight":
        return cls(tuple(sorted((k, as_fraction(v)) for k, v in values.items())), tuple(notes))

    @classmethod
    def from_components(cls, atlas: Atlas, values: Mapping[str, object]) -> "Weight":
        """Spread per-component values (keyed by component id, label or member face) to local faces"""
        report = boundary_holonomy(atlas)
        local, notes = {}, []
        remaining = dict(values)
        for comp in report.components:
            members = [f for f, _ in comp.scale]
            keys = [k for k in (comp.component, comp.label, *members) if k in remaining]
            if not keys:
                raise WeightInconsistent("no weight given for boundary component", component=comp.component)
            value = as_fraction(remaining.pop(keys[0]))
            for extra in keys[1:]:
                remaining.pop(extra)
            if comp.twisted and value != 0:
                notes.append(f"{comp.label or comp.component} is twisted; weight forced to 0")
                value = Fraction(0)
            for face, s in comp.scale:
                local[face] = value / s
        if remaining:
            raise WeightInconsistent(f"weights for unknown faces {sorted(remaining)}")
        return cls.of(local, notes)

    def __getitem__(self, face: str) -> Fraction:
        for k, v in self.values:
            if k == face:
                return v
        raise WeightInconsistent("weight is not defined on the face", face=face)

    def get(self, face: str, default=None):
        return dict(self.values).get(face, default)

    @property
    def faces(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.values)

    def __le__(self, other: "Weight") -> bool:
        mine, theirs = dict(self.values), dict(other.values)
        if set(mine) != set(theirs):
            raise WeightInconsistent("weights live on different faces")
        return all(mine[k] <= theirs[k] for k in mine)

    def __ge__(self, other: "Weight") -> bool:
        return other <= self

    def as_dict(self) -> Dict[str, Fraction]:
        return dict(self.values)


def check_weight(atlas: Atlas, weight: Weight) -> None:
    """Raise WeightInconsistent unless lambda_i = a lambda~_j across every face overlap"""
    for e in _face_edges(atlas):
        if weight[e.source] != e.exponent * weight[e.target]:
            raise WeightInconsistent(
                "weight does not match across the overlap", transition=e.transition, face=e.source
            )


def pullback_weight(f: ChartedMap, weight: Weight) -> Weight:
    """Source face i receives sum_j a_ij lambda_j"""
    flags = classify_map(f)
    if not flags.interior:
        raise NotInterior("pullback needs an interior map", map=f.id)
    out = {}
    for i, row in enumerate(flags.exponent_matrix):
        total = Fraction(0)
        for j, a in enumerate(row):
            face = f.target.faces[j]
            if weight.get(face) is None:
                raise WeightInconsistent("weight is not defined on a target face", map=f.id, face=face)
            total += a * weight[face]
        out[f.source.faces[i]] = total
    return Weight.of(out)


def pushforward_weight(f: ChartedMap, weight: Weight) -> Weight:
    """Largest mu with f*(mu) <= lambda, in the separable b-normal case"""
    flags = require_interior(f)
    matrix = flags.exponent_matrix
    bounds: Dict[int, List[Fraction]] = {j: [] for j in range(f.target.k)}
    for i, row in enumerate(matrix):
        face = f.source.faces[i]
        hits = [j for j, a in enumerate(row) if a > 0]
        if len(hits) > 1:
            raise NotBNormal("source face meets several target faces", map=f.id, face=face)
        lam = weight[face]
        if not hits:
            if lam <= 0:
                raise PositivityViolated(
                    "weight must be positive on faces mapped into the interior", map=f.id, face=face
                )
            continue
        bounds[hits[0]].append(lam / row[hits[0]])
    out = {}
    for j, values in bounds.items():
        if not values:
            raise WeightInconsistent("target face is not hit by any source face", map=f.id, face=f.target.faces[j])
        out[f.target.faces[j]] = min(values)
    return Weight.of(out)


# ----- L_lambda -----


@dataclass(frozen=True)
class LineBundleTransition:
    transition: str
    cocycle: BExpr
    exponents: Tuple[Tuple[str, Fraction], ...]
    touched: Tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "transition": self.transition,
            "cocycle": self.cocycle.to_sexpr(),
            "exponents": dict(self.exponents),
            "touched": list(self.touched),
        }


def _cocycle(t: Transition, weight: Weight) -> LineBundleTransition:
    src, tgt = t.source, t.target
    factored_rows = classify_map(t.forward, t.inverse).exponent_matrix
    touched = [i for i in range(src.k) if t.region[i][0] == 0]
    for i in touched:
        expected = sum(
            (a * weight[tgt.faces[j]] for j, a in enumerate(factored_rows[i])), Fraction(0)
        )
        if weight[src.faces[i]] != expected:
            raise WeightInconsistent(
                "weight does not match across the overlap",
                transition=t.id, face=src.faces[i], expected=expected, given=weight[src.faces[i]],
            )
    expr = sp.Integer(1)
    for name, face in zip(src.boundary, src.faces):
        expr *= src.bexpr(name).expr ** _rational(weight[face])
    for comp, face in zip(t.forward.components, tgt.faces):
        expr *= comp.expr ** -_rational(weight[face])
    cocycle = src.bexpr(sp.powsimp(sp.expand_power_base(expr, force=True), force=True))
    exponents = {}
    for name, face in zip(src.boundary, src.faces):
        lead = leading_behavior(cocycle, name)
        exponents[face] = Fraction(0) if lead.is_zero else lead.alpha
        if face in [src.faces[i] for i in touched] and (lead.alpha != 0 or lead.b != 0):
            raise WeightInconsistent("cocycle keeps a boundary power", transition=t.id, face=face)
    return LineBundleTransition(
        t.id, cocycle, tuple(sorted(exponents.items())), tuple(src.faces[i] for i in touched)
    )


def l_lambda_transitions(atlas: Atlas, weight: Weight) -> Tuple[LineBundleTransition, ...]:
    """Transition functions of L_lambda: prod x_i^lambda_i * prod f_j^-lambda~_j"""
    return tuple(_cocycle(t, weight) for t in atlas.transitions)


def check_l_lambda_cocycle(atlas: Atlas, weight: Weight, samples: Optional[int] = None) -> float:
    """Largest relative defect of g_ac = g_ab * (g_bc after t_ab) on sampled triple overlaps"""
    both = list(atlas.transitions) + [t.reversed() for t in atlas.transitions]
    cocycles = {id(t): _cocycle(t, weight).cocycle for t in both}
    worst = 0.0
    for t1, t2 in itertools.product(both, both):
        if t1.target.id != t2.source.id:
            continue
        closing = [t for t in both if t.source.id == t1.source.id and t.target.id == t2.target.id]
        if t2.target.id == t1.source.id:
            closing = [None]
        for t3 in closing:
            points = t1.forward.sample(samples, faces=False)
            if t3 is not None:
                points = points[_inside(points, t3.region)]
            middle = t1.forward.evaluate_many(points)
            keep = _inside(middle, t2.region)
            if not keep.any():
                continue
            chained = evaluate_many(cocycles[id(t1)], points[keep]) * evaluate_many(cocycles[id(t2)], middle[keep])
            direct = np.ones(int(keep.sum())) if t3 is None else evaluate_many(cocycles[id(t3)], points[keep])
            worst = max(worst, float(np.max(np.abs(chained - direct) / np.abs(direct))))
    return worst
