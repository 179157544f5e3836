from fractions import Fraction
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from lib.atlas import Atlas, Chart, ChartedMap, Transition
from lib.btangent import BVectorField
from lib.elliptic import BOperator1D
from lib.errors import WorkbenchError
from lib.expr import BExpr, parse
from lib.phg import ALPHA_MAX, IndexSet
from lib.weights import Weight, as_fraction
from models import model_space


def _rational(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("expected a rational number")
    try:
        return as_fraction(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ValueError(f"{value!r} is not a rational number")


Rational = Annotated[Fraction, BeforeValidator(_rational)]
Interval = Tuple[float, float]


class Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


# Geometry


class ChartSpec(Spec):
    id: str
    coords: List[str]
    k: int = Field(..., ge=0)
    box: List[Interval]
    kind: Literal["a", "c"] = "a"

    def to_chart(self) -> Chart:
        return Chart(self.id, tuple(self.coords), self.k, tuple(self.box), self.kind)


class TransitionSpec(Spec):
    id: str
    source: str
    target: str
    forward: List[str]
    inverse: List[str]
    region: List[Interval]


class ModelSpec(Spec):
    name: str
    alpha: Optional[Rational] = None

    def build(self) -> Atlas:
        params = {} if self.alpha is None else {"alpha": self.alpha}
        return model_space(self.name, **params)


class FaceLabel(Spec):
    face: str
    label: str


class FunctionSpec(Spec):
    id: str
    expr: str
    boundary: List[str] = ["x"]
    interior: List[str] = []
    expected: Optional[str] = None
    _bexpr: Optional[BExpr] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def parse_expr(self):
        try:
            self._bexpr = parse(self.expr, self.boundary, self.interior)
        except WorkbenchError as err:
            raise ValueError(f"function {self.id}: {err}")
        return self

    @property
    def bexpr(self) -> BExpr:
        return self._bexpr


class MapSpec(Spec):
    id: str
    source: str
    target: str
    components: List[str]
    inverse: Optional[List[str]] = None
    region: Optional[List[Interval]] = None


class VectorFieldSpec(Spec):
    id: str
    chart: str
    coeffs: List[str]


class ProductSpec(Spec):
    left: ModelSpec
    right: ModelSpec


# Weights


class WeightSpec(Spec):
    id: str
    values: Dict[str, Rational] = {}
    components: Dict[str, Rational] = {}

    @model_validator(mode="after")
    def one_form(self):
        if bool(self.values) == bool(self.components):
            raise ValueError(f"weight {self.id}: give exactly one of values or components")
        return self


class WeightMapSpec(Spec):
    map: str
    weight: Dict[str, Rational]


# Gluing profile


class ProbeSpec(Spec):
    map: str
    point: List[float]
    order: int = Field(2, ge=1, le=3)
    strict: bool = True


class EvaluationSpec(Spec):
    map: str
    points: List[List[float]]
    strict: bool = True


# Index sets


class IndexSetSpec(Spec):
    id: str
    pairs: List[Tuple[Rational, int]]
    alpha_max: Rational = ALPHA_MAX

    @field_validator("pairs")
    @classmethod
    def nonnegative_logs(cls, pairs):
        for _, b in pairs:
            if b < 0:
                raise ValueError("log powers must be nonnegative")
        return pairs

    def build(self) -> IndexSet:
        return IndexSet.of(self.pairs, self.alpha_max)


class IndexMapSpec(Spec):
    map: str
    sets: List[str]


class BoundSpec(Spec):
    set: str
    weight: Rational


class OracleSpec(Spec):
    alpha: Rational
    beta: Rational


# Elliptic


class OperatorSpec(Spec):
    id: str
    order: int = Field(..., ge=1)
    coeffs: List[str]
    _operator: Optional[BOperator1D] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def build_operator(self):
        if len(self.coeffs) != self.order + 1:
            raise ValueError(f"operator {self.id}: order {self.order} needs {self.order + 1} coefficients")
        try:
            self._operator = BOperator1D.from_texts(self.coeffs, id=self.id)
        except WorkbenchError as err:
            raise ValueError(f"operator {self.id}: {err}")
        return self

    @property
    def operator(self) -> BOperator1D:
        return self._operator


class SolveSpec(Spec):
    operator: str
    weights: Tuple[Rational, Rational]


class SweepSpec(Spec):
    operator: str
    lo: float
    hi: float
    steps: int = Field(..., ge=0)
    duality: bool = False
    monotonicity: bool = False


class CohomologySpec(Spec):
    interval: bool = False
    holonomies: List[Rational] = []
    alphas: List[Rational] = []


class Manifest(Spec):
    name: str = "manifest"
    model: Optional[ModelSpec] = None
    charts: List[ChartSpec] = []
    transitions: List[TransitionSpec] = []
    faces: List[FaceLabel] = []
    functions: List[FunctionSpec] = []
    maps: List[MapSpec] = []
    vector_fields: List[VectorFieldSpec] = []
    brackets: List[Tuple[str, str]] = []
    compositions: List[Tuple[str, str]] = []
    products: List[ProductSpec] = []
    weights: List[WeightSpec] = []
    weight_pullbacks: List[WeightMapSpec] = []
    weight_pushforwards: List[WeightMapSpec] = []
    probes: List[ProbeSpec] = []
    evaluations: List[EvaluationSpec] = []
    index_sets: List[IndexSetSpec] = []
    pullbacks: List[IndexMapSpec] = []
    pushforwards: List[IndexMapSpec] = []
    bounds: List[BoundSpec] = []
    oracles: List[OracleSpec] = []
    operators: List[OperatorSpec] = []
    solves: List[SolveSpec] = []
    sweeps: List[SweepSpec] = []
    cohomology: Optional[CohomologySpec] = None

    _charts: Dict[str, Chart] = PrivateAttr(default_factory=dict)
    _atlas: Optional[Atlas] = PrivateAttr(default=None)
    _maps: Dict[str, ChartedMap] = PrivateAttr(default_factory=dict)
    _fields: Dict[str, BVectorField] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def resolve(self):
        """Build charts, atlas and maps; every broken reference is reported at once"""
        problems: List[str] = []
        base = None
        if self.model is not None:
            try:
                base = self.model.build()
            except WorkbenchError as err:
                problems.append(f"model: {err}")
        if base is not None:
            self._charts.update({c.id: c for c in base.charts})
        for spec in self.charts:
            if spec.id in self._charts:
                problems.append(f"chart {spec.id}: duplicate id")
                continue
            try:
                self._charts[spec.id] = spec.to_chart()
            except WorkbenchError as err:
                problems.append(f"chart {spec.id}: {err}")

        transitions = list(base.transitions) if base is not None else []
        for spec in self.transitions:
            missing = [c for c in (spec.source, spec.target) if c not in self._charts]
            if missing:
                problems.append(f"transition {spec.id}: unknown charts {missing}")
                continue
            try:
                transitions.append(
                    Transition.build(
                        spec.id,
                        self._charts[spec.source],
                        self._charts[spec.target],
                        spec.forward,
                        spec.inverse,
                        tuple(spec.region),
                    )
                )
            except WorkbenchError as err:
                problems.append(f"transition {spec.id}: {err}")

        known_faces = {face for c in self._charts.values() for face in c.faces}
        for label in self.faces:
            if label.face not in known_faces:
                problems.append(f"face label {label.label}: unknown face {label.face}")
        if base is not None or self.transitions or self.faces:
            labels = (tuple(base.labels) if base is not None else ()) + tuple((f.face, f.label) for f in self.faces)
            try:
                self._atlas = Atlas(
                    base.name if base is not None and not self.charts else self.name,
                    tuple(self._charts.values()),
                    tuple(transitions),
                    labels,
                )
            except WorkbenchError as err:
                problems.append(f"atlas: {err}")

        for spec in self.maps:
            missing = [c for c in (spec.source, spec.target) if c not in self._charts]
            if missing:
                problems.append(f"map {spec.id}: unknown charts {missing}")
                continue
            try:
                self._maps[spec.id] = ChartedMap.from_texts(
                    self._charts[spec.source],
                    self._charts[spec.target],
                    spec.components,
                    id=spec.id,
                    region=tuple(spec.region) if spec.region else None,
                )
                if spec.inverse is not None:
                    self._maps[f"{spec.id}^-1"] = ChartedMap.from_texts(
                        self._charts[spec.target], self._charts[spec.source], spec.inverse, id=f"{spec.id}^-1"
                    )
            except WorkbenchError as err:
                problems.append(f"map {spec.id}: {err}")

        for spec in self.vector_fields:
            if spec.chart not in self._charts:
                problems.append(f"vector field {spec.id}: unknown chart {spec.chart}")
                continue
            try:
                self._fields[spec.id] = BVectorField.from_texts(self._charts[spec.chart], spec.coeffs, spec.id)
            except WorkbenchError as err:
                problems.append(f"vector field {spec.id}: {err}")

        set_ids = {s.id for s in self.index_sets}
        operator_ids = {o.id for o in self.operators}
        for a, b in self.brackets:
            problems += [f"bracket: unknown vector field {v}" for v in (a, b) if v not in self._fields]
        for a, b in self.compositions:
            problems += [f"composition: unknown map {m}" for m in (a, b) if m not in self._maps]
        for spec in self.weight_pullbacks + self.weight_pushforwards + self.probes + self.evaluations:
            if spec.map not in self._maps:
                problems.append(f"unknown map {spec.map}")
        for spec in self.pullbacks + self.pushforwards:
            if spec.map not in self._maps:
                problems.append(f"unknown map {spec.map}")
            problems += [f"unknown index set {s}" for s in spec.sets if s not in set_ids]
        problems += [f"unknown index set {b.set}" for b in self.bounds if b.set not in set_ids]
        for spec in self.solves + self.sweeps:
            if spec.operator not in operator_ids:
                problems.append(f"unknown operator {spec.operator}")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def atlas(self) -> Optional[Atlas]:
        return self._atlas

    def chart(self, id: str) -> Chart:
        return self._charts[id]

    def map(self, id: str) -> ChartedMap:
        return self._maps[id]

    def inverse_of(self, id: str) -> Optional[ChartedMap]:
        return self._maps.get(f"{id}^-1")

    def vector_field(self, id: str) -> BVectorField:
        return self._fields[id]

    def index_set(self, id: str) -> IndexSet:
        return next(s.build() for s in self.index_sets if s.id == id)

    def operator(self, id: str) -> BOperator1D:
        return next(o.operator for o in self.operators if o.id == id)

    def weight(self, spec: WeightSpec) -> Weight:
        if spec.components:
            return Weight.from_components(self._atlas, {k: v for k, v in spec.components.items()})
        return Weight.of(spec.values)


class Report(BaseModel):
    command: str
    inputs_digest: str
    results: Dict[str, Any]
    warnings: List[str] = []
    predictions: List[str] = []
    version: str
    timestamp: str = Field("", description="excluded from determinism comparisons")
