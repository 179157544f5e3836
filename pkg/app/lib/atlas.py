"""
Charts, charted maps and atlases for manifolds with a-corners.

Charts carry explicit boxes; boundary coordinates come first and their boxes
start at 0. Local faces are named ``"{chart}:{coord}"``; global boundary
faces and corner strata are union-find closures over transitions.
"""
import functools
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.stats import qmc

from .env import env_loader, settings_cache
from .errors import DomainError, FactorizationFailure, NotADiffeo, NotInterior
from .expr import BExpr, SmoothnessClass, classify_function, evaluate_many, leading_behavior, parse

logger = logging.getLogger(__name__)

Box = Tuple[Tuple[float, float], ...]
ROUND_TRIP_TOLERANCE = 1e-10


def sample_box(
    box: Box, n: int, seed: int = 0, boundary: Sequence[int] = (), vertices: bool = True
) -> np.ndarray:
    """Scrambled Halton points in ``box`` plus its vertices and points on the listed faces"""
    m = len(box)
    if m == 0:
        return np.zeros((1, 0))
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    points = [qmc.scale(qmc.Halton(d=m, scramble=True, seed=seed).random(n), lo, hi)] if n else []
    if vertices:
        points.append(np.array(list(itertools.product(*box)), dtype=float))
    per_face = max(4, n // 4)
    for size in range(1, len(boundary) + 1):
        for faces in itertools.combinations(boundary, size):
            face_points = qmc.scale(
                qmc.Halton(d=m, scramble=True, seed=seed + size).random(per_face), lo, hi
            )
            face_points[:, list(faces)] = 0.0
            points.append(face_points)
    return np.vstack(points)


@dataclass(frozen=True)
class Chart:
    id: str
    coords: Tuple[str, ...]
    k: int
    box: Box
    kind: str = "a"

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "box", tuple(tuple(float(v) for v in b) for b in self.box))
        if not 0 <= self.k <= len(self.coords):
            raise DomainError("corner count out of range", chart=self.id, k=self.k)
        if len(self.box) != len(self.coords):
            raise DomainError("box does not match the coordinates", chart=self.id)
        if len(set(self.coords)) != len(self.coords):
            raise DomainError("repeated coordinate name", chart=self.id)
        for name, (lo, hi) in zip(self.coords, self.box):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DomainError("chart box must be finite and nonempty", chart=self.id, coord=name)
        for name, (lo, _) in zip(self.boundary, self.box):
            if lo != 0:
                raise DomainError("boundary coordinates must start at 0", chart=self.id, coord=name)
        if self.kind not in ("a", "c"):
            raise DomainError("chart kind must be 'a' or 'c'", chart=self.id)

    @property
    def m(self) -> int:
        return len(self.coords)

    @property
    def boundary(self) -> Tuple[str, ...]:
        return self.coords[: self.k]

    @property
    def interior(self) -> Tuple[str, ...]:
        return self.coords[self.k :]

    def face_id(self, coord: str) -> str:
        return f"{self.id}:{coord}"

    @property
    def faces(self) -> Tuple[str, ...]:
        return tuple(self.face_id(c) for c in self.boundary)

    def bexpr(self, value) -> BExpr:
        if isinstance(value, str):
            return parse(value, self.boundary, self.interior)
        if isinstance(value, BExpr):
            return BExpr(value.expr, self.boundary, self.interior, value.divisors)
        return BExpr(sp.sympify(value), self.boundary, self.interior)

    def sample(self, n: Optional[int] = None, seed: Optional[int] = None, faces: bool = False) -> np.ndarray:
        n = env_loader.BCALC_SAMPLES if n is None else n
        seed = env_loader.BCALC_SEED if seed is None else seed
        return sample_box(self.box, n, seed, boundary=range(self.k) if faces else ())

    def contains(self, point: Sequence[float], tol: float = 1e-12) -> bool:
        return len(point) == self.m and all(
            lo - tol <= v <= hi + tol for v, (lo, hi) in zip(point, self.box)
        )


def depth(point: Sequence[float], chart: Chart) -> int:
    """Number of boundary coordinates of ``point`` equal to 0"""
    if not chart.contains(point):
        raise DomainError("point is outside the chart domain", chart=chart.id, point=tuple(point))
    return sum(1 for v in point[: chart.k] if v == 0)


@dataclass(frozen=True)
class FactoredComponent:
    target: str
    exponents: Tuple[Fraction, ...] = ()
    factor: Optional[BExpr] = None
    zero: bool = False

    def as_dict(self) -> dict:
        if self.zero:
            return {"target": self.target, "zero": True}
        return {
            "target": self.target,
            "zero": False,
            "exponents": list(self.exponents),
            "factor": self.factor.to_sexpr(),
        }


@dataclass(frozen=True)
class ChartedMap:
    source: Chart
    target: Chart
    components: Tuple[BExpr, ...]
    id: str = ""
    region: Optional[Box] = None

    def __post_init__(self):
        if len(self.components) != self.target.m:
            raise DomainError(
                f"map has {len(self.components)} components, target has dimension {self.target.m}",
                map=self.id,
            )
        object.__setattr__(self, "components", tuple(self.source.bexpr(c) for c in self.components))
        if self.region is not None:
            object.__setattr__(self, "region", tuple(tuple(float(v) for v in b) for b in self.region))

    @classmethod
    def from_texts(cls, source: Chart, target: Chart, texts: Sequence[str], **kwargs) -> "ChartedMap":
        return cls(source, target, tuple(source.bexpr(t) for t in texts), **kwargs)

    @property
    def domain(self) -> Box:
        return self.region if self.region is not None else self.source.box

    def sample(self, n: Optional[int] = None, seed: Optional[int] = None, faces: bool = True) -> np.ndarray:
        n = env_loader.BCALC_SAMPLES if n is None else n
        seed = env_loader.BCALC_SEED if seed is None else seed
        touching = [i for i in range(self.source.k) if self.domain[i][0] == 0] if faces else []
        return sample_box(self.domain, n, seed, boundary=touching)

    def __call__(self, point: Sequence[float]) -> Tuple[float, ...]:
        return tuple(c.evaluate(point) for c in self.components)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if not self.components:
            return np.zeros((len(points), 0))
        return np.column_stack([evaluate_many(c, points) for c in self.components])

    def to_sexprs(self) -> List[str]:
        return [c.to_sexpr() for c in self.components]


def identity_map(chart: Chart) -> ChartedMap:
    return ChartedMap(chart, chart, tuple(chart.bexpr(sp.Symbol(c)) for c in chart.coords), id=f"id:{chart.id}")


def compose(f: ChartedMap, g: ChartedMap) -> ChartedMap:
    """g after f"""
    if f.target.coords != g.source.coords:
        raise DomainError("maps are not composable", first=f.id, second=g.id)
    mapping = dict(zip(g.source.coords, f.components))
    template = f.source.bexpr(0)
    comps = tuple(c.subs(mapping, target=template) for c in g.components)
    return ChartedMap(f.source, g.target, comps, id=f"{g.id}.{f.id}", region=f.region)


# ----- factorization and classification -----


@settings_cache(maxsize=1024)
def factor_components(f: ChartedMap, order: Optional[int] = None) -> Tuple[FactoredComponent, ...]:
    """Write each boundary-target component as F * prod x_i^a_i with F positive and a-smooth"""
    out = []
    points = f.sample()
    for comp, name in zip(f.components, f.target.boundary):
        if comp.is_zero():
            out.append(FactoredComponent(name, zero=True))
            continue
        exponents = []
        for face in f.source.boundary:
            lead = leading_behavior(comp, face)
            if lead.b != 0 or lead.alpha < 0:
                raise FactorizationFailure(
                    "component is not a monomial times a positive function at the face",
                    map=f.id, component=name, face=face, alpha=lead.alpha, log_power=lead.b,
                )
            exponents.append(lead.alpha)
        monomial = sp.Mul(*[
            comp.symbol(face) ** -sp.Rational(a.numerator, a.denominator)
            for face, a in zip(f.source.boundary, exponents)
        ])
        factor = comp.with_expr(sp.powsimp(sp.expand(comp.expr * monomial)))
        report = classify_function(factor, order)
        if report.verdict is not SmoothnessClass.ASmooth:
            raise FactorizationFailure(
                f"residual factor is {report.verdict.value}", map=f.id, component=name
            )
        values = evaluate_many(factor, points)
        if np.any(values <= 0):
            raise FactorizationFailure("residual factor is not positive", map=f.id, component=name)
        out.append(FactoredComponent(name, tuple(exponents), factor))
    return tuple(out)


def exponent_matrix(f: ChartedMap) -> Tuple[Tuple[Fraction, ...], ...]:
    """Rows are source faces, columns target faces; zero-flagged columns are 0"""
    factored = factor_components(f)
    return tuple(
        tuple(Fraction(0) if c.zero else c.exponents[i] for c in factored)
        for i in range(f.source.k)
    )


@dataclass(frozen=True)
class MapFlags:
    smooth: bool
    interior: bool
    b_normal: bool
    strongly_smooth: bool
    diffeo: bool
    exponent_matrix: Tuple[Tuple[Fraction, ...], ...]
    zero: Tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "smooth": self.smooth,
            "interior": self.interior,
            "b_normal": self.b_normal,
            "strongly_smooth": self.strongly_smooth,
            "diffeo": self.diffeo,
            "exponent_matrix": [list(row) for row in self.exponent_matrix],
            "zero_components": list(self.zero),
        }


def _is_identity(f: ChartedMap) -> bool:
    return f.source.coords == f.target.coords and f.source.k == f.target.k and all(
        c.expr == c.symbol(name) for c, name in zip(f.components, f.source.coords)
    )


def round_trip_error(f: ChartedMap, inverse: ChartedMap, points: Optional[np.ndarray] = None) -> float:
    points = f.sample() if points is None else points
    back = inverse.evaluate_many(f.evaluate_many(points))
    return float(np.max(np.abs(back - points), initial=0.0))


def _faces_to_faces(f: ChartedMap) -> bool:
    """Every face met by the domain is sent into exactly one target face"""
    matrix = exponent_matrix(f)
    return all(
        sum(1 for a in row if a > 0) == 1
        for i, row in enumerate(matrix)
        if f.domain[i][0] == 0
    )


@settings_cache(maxsize=1024)
def classify_map(f: ChartedMap, inverse: Optional[ChartedMap] = None, order: Optional[int] = None) -> MapFlags:
    factored = factor_components(f, order)
    matrix = exponent_matrix(f)
    zero = tuple(c.target for c in factored if c.zero)
    smooth = all(
        classify_function(c, order).verdict is SmoothnessClass.ASmooth
        for c in f.components[f.target.k :]
    )
    interior = not zero
    b_normal = interior and all(sum(1 for a in row if a > 0) <= 1 for row in matrix)
    strongly = all(sum(1 for row in matrix if row[j] > 0) <= 1 for j in range(f.target.k))
    diffeo = _is_identity(f)
    if not diffeo and inverse is not None and f.source.m == f.target.m and f.source.k == f.target.k:
        pattern = interior and strongly and _faces_to_faces(f) and _faces_to_faces(inverse)
        diffeo = smooth and pattern and round_trip_error(f, inverse) <= ROUND_TRIP_TOLERANCE
    return MapFlags(smooth, interior, b_normal, strongly, diffeo, matrix, zero)


# ----- corner components -----


@dataclass(frozen=True)
class CornerComponent:
    chart: str
    faces: FrozenSet[str]
    point: Tuple[float, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.faces)

    def as_dict(self) -> dict:
        return {"chart": self.chart, "faces": sorted(self.faces), "point": list(self.point)}


def corner_at(chart: Chart, faces: Iterable[str]) -> CornerComponent:
    """Local corner component of ``chart`` on the given faces, with a representative point"""
    faces = frozenset(faces)
    unknown = faces - set(chart.boundary)
    if unknown:
        raise DomainError(f"not boundary coordinates: {sorted(unknown)}", chart=chart.id)
    point = tuple(
        0.0 if name in faces else (lo + hi) / 2 for name, (lo, hi) in zip(chart.coords, chart.box)
    )
    return CornerComponent(chart.id, faces, point)


def corner_map(f: ChartedMap, gamma: CornerComponent) -> CornerComponent:
    """Image stratum of a local corner component under an a-smooth map"""
    if gamma.chart != f.source.id:
        raise DomainError("corner component lives on another chart", chart=gamma.chart, map=f.id)
    rows = [f.source.boundary.index(face) for face in gamma.faces]
    factored = factor_components(f)
    faces = frozenset(
        c.target for c in factored if c.zero or any(c.exponents[i] > 0 for i in rows)
    )
    point = gamma.point or corner_at(f.source, gamma.faces).point
    image = tuple(float(v) for v in f(point))
    on_faces = {name for name, v in zip(f.target.boundary, image) if v == 0}
    if on_faces != faces:
        logger.warning("image point of %s lies on %s, stratum rule gives %s", f.id, sorted(on_faces), sorted(faces))
    return CornerComponent(f.target.id, faces, image)


# ----- atlases -----


@dataclass(frozen=True)
class Transition:
    id: str
    forward: ChartedMap
    inverse: ChartedMap

    @property
    def source(self) -> Chart:
        return self.forward.source

    @property
    def target(self) -> Chart:
        return self.forward.target

    @property
    def region(self) -> Box:
        return self.forward.domain

    @classmethod
    def build(
        cls, id: str, source: Chart, target: Chart, forward: Sequence, inverse: Sequence, region: Box
    ) -> "Transition":
        fwd = ChartedMap(source, target, tuple(source.bexpr(t) for t in forward), id=id, region=region)
        image = fwd.evaluate_many(sample_box(fwd.domain, 32, 0))
        inverse_region = tuple(
            (0.0 if i < target.k and lo < 1e-12 else max(float(lo), target.box[i][0]), min(float(hi), target.box[i][1]))
            for i, (lo, hi) in enumerate(zip(image.min(axis=0), image.max(axis=0)))
        ) if target.m else ()
        inv = ChartedMap(
            target, source, tuple(target.bexpr(t) for t in inverse), id=f"{id}^-1", region=inverse_region
        )
        return cls(id, fwd, inv)

    def face_map(self) -> Dict[str, str]:
        """Local faces of the source met by the overlap, mapped to target faces"""
        flags = classify_map(self.forward, self.inverse)
        if not flags.diffeo:
            raise NotADiffeo("transition is not a diffeomorphism", transition=self.id)
        out = {}
        for i, row in enumerate(flags.exponent_matrix):
            if self.region[i][0] != 0:
                continue
            hits = [j for j, a in enumerate(row) if a > 0]
            if len(hits) != 1:
                raise NotADiffeo("face is not sent to a single face", transition=self.id)
            out[self.source.face_id(self.source.boundary[i])] = self.target.face_id(self.target.boundary[hits[0]])
        return out

    def reversed(self) -> "Transition":
        return Transition(f"{self.id}^-1", self.inverse, self.forward)


class _UnionFind:
    def __init__(self, items: Iterable):
        self.parent = {item: item for item in items}

    def find(self, item):
        while self.parent[item] != item:
            self.parent[item] = self.parent[self.parent[item]]
            item = self.parent[item]
        return item

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def classes(self) -> List[Tuple]:
        groups: Dict = {}
        for item in self.parent:
            groups.setdefault(self.find(item), []).append(item)
        return [tuple(sorted(g)) for _, g in sorted(groups.items())]


@dataclass(frozen=True)
class FaceComponent:
    id: str
    members: Tuple[str, ...]
    label: Optional[str] = None

    def as_dict(self) -> dict:
        return {"id": self.id, "label": self.label, "members": list(self.members)}


@dataclass(frozen=True)
class Atlas:
    name: str
    charts: Tuple[Chart, ...]
    transitions: Tuple[Transition, ...] = ()
    labels: Tuple[Tuple[str, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        ids = [c.id for c in self.charts]
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate chart id", atlas=self.name)
        dims = {c.m for c in self.charts}
        if len(dims) > 1:
            raise DomainError("charts have different dimensions", atlas=self.name)

    @property
    def dimension(self) -> int:
        return self.charts[0].m if self.charts else 0

    def chart(self, id: str) -> Chart:
        for c in self.charts:
            if c.id == id:
                return c
        raise DomainError(f"unknown chart {id!r}", atlas=self.name)

    @property
    def local_faces(self) -> Tuple[str, ...]:
        return tuple(face for c in self.charts for face in c.faces)

    def transition(self, id: str) -> Transition:
        for t in self.transitions:
            if t.id == id:
                return t
        raise DomainError(f"unknown transition {id!r}", atlas=self.name)


@functools.lru_cache(maxsize=256)
def boundary_components(atlas: Atlas) -> Tuple[FaceComponent, ...]:
    """Global boundary faces: local faces glued along transitions"""
    uf = _UnionFind(atlas.local_faces)
    for t in atlas.transitions:
        for a, b in t.face_map().items():
            uf.union(a, b)
    labels = dict(atlas.labels)
    out = []
    for members in uf.classes():
        names = {labels[m] for m in members if m in labels}
        if len(names) > 1:
            raise DomainError(f"one boundary component carries labels {sorted(names)}", atlas=atlas.name)
        out.append(FaceComponent(members[0], members, names.pop() if names else None))
    return tuple(out)


def face_component_of(atlas: Atlas, local_face: str) -> FaceComponent:
    for comp in boundary_components(atlas):
        if local_face in comp.members:
            return comp
    raise DomainError(f"unknown local face {local_face!r}", atlas=atlas.name)


def faces_embedded(atlas: Atlas) -> bool:
    """True when no boundary component meets a chart in two local faces"""
    for comp in boundary_components(atlas):
        charts = [m.split(":", 1)[0] for m in comp.members]
        if len(charts) != len(set(charts)):
            return False
    return True


def connected_components(atlas: Atlas) -> int:
    uf = _UnionFind([c.id for c in atlas.charts])
    for t in atlas.transitions:
        uf.union(t.source.id, t.target.id)
    return len(uf.classes())


def _ordered_strata(atlas: Atlas, k: int) -> List[Tuple]:
    nodes = [
        (c.id, faces) for c in atlas.charts for faces in itertools.permutations(c.boundary, k)
    ]
    uf = _UnionFind(nodes)
    for t in atlas.transitions:
        fmap = t.face_map()
        for faces in itertools.permutations(t.source.boundary, k):
            ids = [t.source.face_id(f) for f in faces]
            if all(i in fmap for i in ids):
                image = tuple(fmap[i].split(":", 1)[1] for i in ids)
                uf.union((t.source.id, faces), (t.target.id, image))
    return uf.classes()


def boundary_counts(atlas: Atlas, k: int) -> int:
    """Number of connected components of the k-fold boundary (ordered faces)"""
    if k == 0:
        return connected_components(atlas)
    return len(_ordered_strata(atlas, k))


def corner_counts(atlas: Atlas) -> Dict[int, int]:
    """#C_k for k = 0..dim: connected strata of depth k, faces unordered"""
    counts = {}
    for k in range(atlas.dimension + 1):
        if k == 0:
            counts[0] = connected_components(atlas) if atlas.charts else 0
            continue
        classes = _ordered_strata(atlas, k)
        uf = _UnionFind(range(len(classes)))
        index = {node: n for n, cls in enumerate(classes) for node in cls}
        for n, cls in enumerate(classes):
            for chart, faces in cls:
                uf.union(n, index[(chart, tuple(sorted(faces)))])
        counts[k] = len(uf.classes())
    return counts


def _drop(box: Box, i: int) -> Box:
    return box[:i] + box[i + 1 :]


def _restricted_map(f: ChartedMap, coord: str, face: str, source: Chart, target: Chart, region: Box) -> ChartedMap:
    drop = f.target.coords.index(face)
    comps = []
    for j, comp in enumerate(f.components):
        if j == drop:
            continue
        restricted = comp.restrict(coord)
        comps.append(source.bexpr(restricted.expr))
    return ChartedMap(source, target, tuple(comps), id=f.id, region=region)


def boundary_atlas(atlas: Atlas) -> Atlas:
    """Atlas of the boundary: one chart per (chart, boundary coordinate)"""
    charts = {}
    for c in atlas.charts:
        for i, coord in enumerate(c.boundary):
            charts[c.face_id(coord)] = Chart(
                f"{c.id}|{coord}", c.coords[:i] + c.coords[i + 1 :], c.k - 1, _drop(c.box, i), c.kind
            )
    transitions = []
    for t in atlas.transitions:
        for src_face, tgt_face in t.face_map().items():
            coord = src_face.split(":", 1)[1]
            tcoord = tgt_face.split(":", 1)[1]
            source, target = charts[src_face], charts[tgt_face]
            i = t.source.coords.index(coord)
            j = t.target.coords.index(tcoord)
            forward = _restricted_map(t.forward, coord, tcoord, source, target, _drop(t.region, i))
            inverse = _restricted_map(t.inverse, tcoord, coord, target, source, _drop(t.inverse.domain, j))
            transitions.append(Transition(f"{t.id}|{coord}", forward, inverse))
    return Atlas(f"boundary({atlas.name})", tuple(charts.values()), tuple(transitions))


# ----- products -----


def _renaming(a: Atlas, b: Atlas) -> Dict[str, str]:
    taken = {name for c in a.charts for name in c.coords}
    out = {}
    for name in sorted({name for c in b.charts for name in c.coords}):
        new = name
        while new in taken:
            new = f"{new}_2"
        out[name] = new
        taken.add(new)
    return out


def _product_chart(ca: Chart, cb: Chart, rename: Mapping[str, str]) -> Chart:
    coords = ca.boundary + tuple(rename[n] for n in cb.boundary) + ca.interior + tuple(rename[n] for n in cb.interior)
    box = ca.box[: ca.k] + cb.box[: cb.k] + ca.box[ca.k :] + cb.box[cb.k :]
    kind = "a" if "a" in (ca.kind, cb.kind) else "c"
    return Chart(f"{ca.id}*{cb.id}", coords, ca.k + cb.k, box, kind)


def _product_region(ra: Box, ka: int, rb: Box, kb: int) -> Box:
    return ra[:ka] + rb[:kb] + ra[ka:] + rb[kb:]


def _product_components(
    fa: ChartedMap, fb: ChartedMap, source: Chart, target: Chart, rename: Mapping[str, str]
) -> Tuple[BExpr, ...]:
    from_b = {n: sp.Symbol(rename[n]) for n in fb.source.coords}

    def lift_a(c: BExpr) -> BExpr:
        return source.bexpr(c.expr)

    def lift_b(c: BExpr) -> BExpr:
        return source.bexpr(c.expr.xreplace({c.symbol(n): from_b[n] for n in c.variables}))

    a_b, a_i = fa.components[: fa.target.k], fa.components[fa.target.k :]
    b_b, b_i = fb.components[: fb.target.k], fb.components[fb.target.k :]
    return tuple(lift_a(c) for c in a_b) + tuple(lift_b(c) for c in b_b) + tuple(
        lift_a(c) for c in a_i
    ) + tuple(lift_b(c) for c in b_i)


def product_atlas(a: Atlas, b: Atlas) -> Atlas:
    """Product atlas; coordinates ordered (a boundary, b boundary, a interior, b interior)"""
    rename = _renaming(a, b)
    charts = {(ca.id, cb.id): _product_chart(ca, cb, rename) for ca in a.charts for cb in b.charts}
    transitions = []

    def lift(fa: ChartedMap, fb: ChartedMap, src: Chart, tgt: Chart, tid: str) -> ChartedMap:
        region = _product_region(fa.domain, fa.source.k, fb.domain, fb.source.k)
        return ChartedMap(src, tgt, _product_components(fa, fb, src, tgt, rename), id=tid, region=region)

    for t in a.transitions:
        for cb in b.charts:
            idb = identity_map(cb)
            src, tgt = charts[(t.source.id, cb.id)], charts[(t.target.id, cb.id)]
            tid = f"{t.id}*{cb.id}"
            transitions.append(
                Transition(tid, lift(t.forward, idb, src, tgt, tid), lift(t.inverse, idb, tgt, src, f"{tid}^-1"))
            )
    for t in b.transitions:
        for ca in a.charts:
            ida = identity_map(ca)
            src, tgt = charts[(ca.id, t.source.id)], charts[(ca.id, t.target.id)]
            tid = f"{ca.id}*{t.id}"
            transitions.append(
                Transition(tid, lift(ida, t.forward, src, tgt, tid), lift(ida, t.inverse, tgt, src, f"{tid}^-1"))
            )
    return Atlas(f"{a.name}*{b.name}", tuple(charts.values()), tuple(transitions))


# ----- coherence -----


@dataclass(frozen=True)
class TransitionCheck:
    round_trip: float
    cocycle: float
    triples: int

    def as_dict(self) -> dict:
        return {"round_trip": self.round_trip, "cocycle": self.cocycle, "triples": self.triples}


def _inside(points: np.ndarray, box: Box, tol: float = 1e-12) -> np.ndarray:
    if not box:
        return np.ones(len(points), dtype=bool)
    lo = np.array([b[0] for b in box]) - tol
    hi = np.array([b[1] for b in box]) + tol
    return np.all((points >= lo) & (points <= hi), axis=1)


def check_transitions(atlas: Atlas, samples: Optional[int] = None) -> TransitionCheck:
    """Round trips and triple-overlap coherence on sampled overlaps"""
    worst_round, worst_cocycle, triples = 0.0, 0.0, 0
    for t in atlas.transitions:
        if not classify_map(t.forward, t.inverse).diffeo:
            raise NotADiffeo("transition is not a diffeomorphism", transition=t.id)
        worst_round = max(worst_round, round_trip_error(t.forward, t.inverse, t.forward.sample(samples)))
    both = list(atlas.transitions) + [t.reversed() for t in atlas.transitions]
    for t1, t2 in itertools.product(both, both):
        if t1.target.id != t2.source.id or t2.target.id == t1.source.id:
            continue
        for t3 in both:
            if t3.source.id != t1.source.id or t3.target.id != t2.target.id:
                continue
            points = t1.forward.sample(samples)
            points = points[_inside(points, t3.region)]
            if not len(points):
                continue
            middle = t1.forward.evaluate_many(points)
            keep = _inside(middle, t2.region)
            if not keep.any():
                continue
            triples += 1
            direct = t3.forward.evaluate_many(points[keep])
            chained = t2.forward.evaluate_many(middle[keep])
            worst_cocycle = max(worst_cocycle, float(np.max(np.abs(direct - chained))))
    if worst_round > ROUND_TRIP_TOLERANCE or worst_cocycle > ROUND_TRIP_TOLERANCE:
        raise NotADiffeo(
            "transitions are not coherent", atlas=atlas.name, round_trip=worst_round, cocycle=worst_cocycle
        )
    return TransitionCheck(worst_round, worst_cocycle, triples)


def require_interior(f: ChartedMap) -> MapFlags:
    flags = classify_map(f)
    if not flags.interior:
        raise NotInterior("map has identically zero boundary components", map=f.id, components=",".join(flags.zero))
    return flags
