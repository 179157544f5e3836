"""
Gluing profile phi(x) = exp(x - 1/x) and the transform of maps from a-corner
coordinates to ordinary-corner coordinates.

Transformed boundary components are computed in log form, so points very
close to a face never underflow.
"""
import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from .atlas import ChartedMap, classify_map, factor_components
from .errors import DomainError, NotStronglySmooth

logger = logging.getLogger(__name__)

PROBE_EXPONENTS = range(8, 25)
CAUCHY_TOLERANCE = 1e-3
DIVERGENCE_OCTAVES = 6
ROUNDOFF_BUDGET = 1e-6


def _check(x: float) -> float:
    x = float(x)
    if x < 0 or math.isnan(x):
        raise DomainError("gluing profile is defined on [0, inf)", value=x)
    return x


def log_phi(x: float) -> float:
    x = _check(x)
    if x == 0:
        return -math.inf
    return x - 1 / x


def phi(x: float) -> float:
    x = _check(x)
    if x == 0:
        return 0.0
    try:
        return math.exp(x - 1 / x)
    except OverflowError:
        return math.inf


def phi_inv_from_log(ell: float) -> float:
    """Inverse of phi given log of its argument"""
    if ell == -math.inf:
        return 0.0
    if ell < 0:
        return 2 / (-ell + math.hypot(ell, 2))
    return (ell + math.hypot(ell, 2)) / 2


def phi_inv(x: float) -> float:
    x = _check(x)
    if x == 0:
        return 0.0
    return phi_inv_from_log(math.log(x))


@dataclass(frozen=True)
class GlueTransform:
    map: ChartedMap
    strongly_smooth: bool

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        f = self.map
        src = f.source
        if len(point) != src.m:
            raise DomainError(f"expected {src.m} coordinates", map=f.id)
        logs = [log_phi(v) for v in point[: src.k]]
        x = [phi(v) for v in point[: src.k]] + [float(v) for v in point[src.k :]]
        out = []
        for comp in factor_components(f):
            if comp.zero:
                out.append(0.0)
                continue
            ell = math.log(comp.factor.evaluate(x))
            for a, lg in zip(comp.exponents, logs):
                if a > 0:
                    ell += float(a) * lg
            out.append(phi_inv_from_log(ell))
        for comp in f.components[f.target.k :]:
            out.append(comp.evaluate(x))
        return np.array(out, dtype=float)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.array([self(p) for p in np.atleast_2d(points)])


def transform_map(f: ChartedMap, strongly_smooth_required: bool = True) -> GlueTransform:
    """phi^-1 after f after phi on boundary coordinates, identity elsewhere"""
    flags = classify_map(f)
    if strongly_smooth_required and not flags.strongly_smooth:
        raise NotStronglySmooth("map has a target face met by several source faces", map=f.id)
    return GlueTransform(f, flags.strongly_smooth)


# ----- smoothness probe -----


@dataclass(frozen=True)
class DerivativeProbe:
    component: int
    multi_index: Tuple[int, ...]
    estimates: Tuple[float, ...]
    converged: bool
    label: str

    @property
    def name(self) -> str:
        return f"f{self.component}_d" + "".join(str(b) for b in self.multi_index)

    def as_dict(self) -> dict:
        return {
            "component": self.component,
            "multi_index": list(self.multi_index),
            "converged": self.converged,
            "label": self.label,
            "last": self.estimates[-1] if self.estimates else None,
        }


@dataclass(frozen=True)
class ProbeReport:
    verdict: str
    point: Tuple[float, ...]
    order: int
    steps: Tuple[float, ...]
    derivatives: Tuple[DerivativeProbe, ...] = field(default=())

    @property
    def smooth(self) -> bool:
        return self.verdict == "smooth-consistent"

    def estimate(self, component: int, multi_index: Sequence[int]) -> float:
        for d in self.derivatives:
            if d.component == component and d.multi_index == tuple(multi_index):
                return d.estimates[-1]
        raise KeyError((component, tuple(multi_index)))

    def rows(self) -> List[Dict[str, object]]:
        out = []
        for n, h in enumerate(self.steps):
            row = {"h": h}
            for d in self.derivatives:
                row[d.name] = d.estimates[n] if n < len(d.estimates) else ""
            out.append(row)
        return out

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = self.rows()
        with path.open("w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=["h"] + [d.name for d in self.derivatives])
            writer.writeheader()
            writer.writerows(rows)
        return path

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "point": list(self.point),
            "order": self.order,
            "derivatives": [d.as_dict() for d in self.derivatives],
        }


def _multi_indices(m: int, order: int):
    for d in range(1, order + 1):
        for combo in itertools.combinations_with_replacement(range(m), d):
            yield tuple(combo.count(i) for i in range(m))


def _forward_difference(t: GlueTransform, point: np.ndarray, beta: Tuple[int, ...], h: float) -> Tuple[np.ndarray, float]:
    total = 0.0
    largest = 0.0
    for shift in itertools.product(*[range(b + 1) for b in beta]):
        sign = (-1) ** (sum(beta) - sum(shift))
        weight = float(np.prod([comb(b, k, exact=True) for b, k in zip(beta, shift)]))
        value = t(point + h * np.array(shift, dtype=float))
        largest = max(largest, float(np.max(np.abs(value), initial=0.0)))
        total = total + sign * weight * value
    return total / h ** sum(beta), largest


def _classify(estimates: List[float]) -> Tuple[bool, str]:
    if len(estimates) >= 4:
        diffs = np.abs(np.diff(estimates[-4:]))
        scale = max(1.0, abs(estimates[-1]))
        if np.all(diffs <= CAUCHY_TOLERANCE * scale):
            return True, "converged"
    tail = np.abs(estimates[-DIVERGENCE_OCTAVES:])
    if len(tail) == DIVERGENCE_OCTAVES and np.all(np.diff(tail) > 0):
        return False, "diverges"
    return False, "oscillates"


def smoothness_probe(t: GlueTransform, point: Sequence[float], order: int = 2) -> ProbeReport:
    """One-sided difference quotients on h = 2^-n; smooth-consistent iff all of them settle"""
    src = t.map.source
    base = np.asarray(point, dtype=float)
    if len(base) != src.m or not any(v == 0 for v in base[: src.k]):
        raise DomainError("probe point must lie on a boundary face", point=tuple(base))
    steps = tuple(2.0 ** -n for n in PROBE_EXPONENTS)
    eps = np.finfo(float).eps
    derivatives = []
    for beta in _multi_indices(src.m, order):
        d = sum(beta)
        series: Dict[int, List[float]] = {}
        for h in steps:
            estimate, largest = _forward_difference(t, base, beta, h)
            if eps * max(largest, 1.0) * 2**d / h**d > ROUNDOFF_BUDGET:
                break
            for j, value in enumerate(estimate):
                series.setdefault(j, []).append(float(value))
        for j in range(t.map.target.m):
            estimates = series.get(j, [])
            converged, label = _classify(estimates) if estimates else (False, "unresolved")
            derivatives.append(DerivativeProbe(j, beta, tuple(estimates), converged, label))
    smooth = all(d.converged for d in derivatives)
    verdict = "smooth-consistent" if smooth else "non-smooth-detected"
    if not smooth:
        failing = [d.name for d in derivatives if not d.converged]
        logger.info("probe of %s at %s: %s (%s)", t.map.id, tuple(base), verdict, ", ".join(failing))
    return ProbeReport(verdict, tuple(base.tolist()), order, steps, tuple(derivatives))
