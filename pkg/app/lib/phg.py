"""
Index sets of polyhomogeneous expansions and their pullback and pushforward.

An index set is a finite set of (exponent, log power) pairs truncated at
``alpha_max``; pairs above the cut are implicit.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import NotBNormal, PositivityViolated

logger = logging.getLogger(__name__)

ALPHA_MAX = Fraction(10)
ORACLE_EXPONENTS = range(20, 61, 2)
ORACLE_TOLERANCE = 0.02  # fitted exponent against the extended-union prediction

Pair = Tuple[Fraction, int]
Matrix = Sequence[Sequence[Fraction]]


def _pair(alpha, b) -> Pair:
    alpha = alpha if isinstance(alpha, Fraction) else Fraction(str(alpha))
    if int(b) != b or b < 0:
        raise ValueError(f"log power must be a nonnegative integer, got {b}")
    return alpha, int(b)


@dataclass(frozen=True)
class IndexSet:
    pairs: FrozenSet[Pair] = frozenset()
    alpha_max: Fraction = ALPHA_MAX

    def __post_init__(self):
        cleaned = frozenset(_pair(a, b) for a, b in self.pairs)
        object.__setattr__(self, "pairs", frozenset(p for p in cleaned if p[0] <= self.alpha_max))

    @classmethod
    def of(cls, pairs: Iterable, alpha_max: Fraction = ALPHA_MAX) -> "IndexSet":
        return cls(frozenset(tuple(p) for p in pairs), alpha_max)

    @classmethod
    def from_json(cls, pairs: Iterable[Sequence], alpha_max: Fraction = ALPHA_MAX) -> "IndexSet":
        return cls.of(((Fraction(str(a)), int(b)) for a, b in pairs), alpha_max)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return _pair(*pair) in self.pairs

    def __le__(self, other: "IndexSet") -> bool:
        return self.pairs <= other.pairs

    def leading(self) -> Optional[Pair]:
        """Smallest exponent, and the largest log power that comes with it"""
        if not self.pairs:
            return None
        alpha = min(a for a, _ in self.pairs)
        return alpha, max(b for a, b in self.pairs if a == alpha)

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self.pairs | other.pairs, min(self.alpha_max, other.alpha_max))

    def extended_union(self, other: "IndexSet") -> "IndexSet":
        extra = {
            (a1, b1 + b2 + 1) for a1, b1 in self.pairs for a2, b2 in other.pairs if a1 == a2
        }
        return IndexSet(self.pairs | other.pairs | extra, min(self.alpha_max, other.alpha_max))

    def scaled(self, factor: Fraction) -> "IndexSet":
        return IndexSet(frozenset((a * factor, b) for a, b in self.pairs), self.alpha_max)

    def as_json(self) -> List[list]:
        return [[_text(a), b] for a, b in self]


def _text(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def pullback_index(matrix: Matrix, target_sets: Sequence[IndexSet], alpha_max: Fraction = ALPHA_MAX) -> List[IndexSet]:
    """Source face i gets sums over one pair from each target face it meets; empty target sets count as smooth"""
    out = []
    for row in matrix:
        faces = [(Fraction(a), target_sets[j]) for j, a in enumerate(row) if a > 0 and len(target_sets[j])]
        if not faces:
            out.append(IndexSet(frozenset(), alpha_max))
            continue
        pairs = set()
        for choice in itertools.product(*[list(s) for _, s in faces]):
            alpha = sum((a * p[0] for (a, _), p in zip(faces, choice)), Fraction(0))
            if alpha <= alpha_max:
                pairs.add((alpha, sum(p[1] for p in choice)))
        out.append(IndexSet(frozenset(pairs), alpha_max))
    return out


def pushforward_index(
    matrix: Matrix, source_sets: Sequence[IndexSet], alpha_max: Fraction = ALPHA_MAX
) -> List[IndexSet]:
    """Extended union of the pushed source sets over each target face"""
    width = len(matrix[0]) if matrix else 0
    pushed: Dict[int, List[IndexSet]] = {j: [] for j in range(width)}
    for i, row in enumerate(matrix):
        hits = [j for j, a in enumerate(row) if a > 0]
        if len(hits) > 1:
            raise NotBNormal("source face meets several target faces", face=i)
        if not hits:
            bad = [a for a, _ in source_sets[i] if a <= 0]
            if bad:
                raise PositivityViolated(
                    "exponents on faces mapped into the interior must be positive", face=i, exponent=min(bad)
                )
            continue
        j = hits[0]
        pushed[j].append(source_sets[i].scaled(1 / Fraction(row[j])))
    empty = IndexSet(frozenset(), alpha_max)
    return [reduce(IndexSet.extended_union, pushed[j], empty) if pushed[j] else empty for j in range(width)]


def phg_to_weight_bound(index_set: IndexSet, weight) -> bool:
    """Every pair is either exactly (weight, 0) or strictly above the weight"""
    lam = weight if isinstance(weight, Fraction) else Fraction(str(weight))
    return all((a == lam and b == 0) or a > lam for a, b in index_set.pairs)


def best_weight(index_set: IndexSet) -> Tuple[Fraction, bool]:
    """Largest admissible weight and whether it is attained"""
    lead = index_set.leading()
    if lead is None:
        return index_set.alpha_max, False
    alpha = lead[0]
    return alpha, lead[1] == 0


@dataclass(frozen=True)
class OracleFit:
    alpha: Fraction
    beta: Fraction
    exponent: float
    log_power: float
    has_log: bool

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "exponent": self.exponent,
            "log_power": self.log_power,
            "has_log": self.has_log,
        }


def pushed_density(alpha: float, beta: float, t: float) -> float:
    """Integral of x^alpha y^beta dx/x over the fibre {xy = t, x, y <= 1}"""
    log_t = math.log(t)
    value, _ = integrate.quad(
        lambda u: math.exp(alpha * u + beta * (log_t - u)),
        log_t,
        0.0,
        epsabs=0.0,
        epsrel=1e-10,
        limit=200,
    )
    return value


def pushforward_oracle(alpha, beta, exponents: Iterable[int] = ORACLE_EXPONENTS) -> OracleFit:
    """Fit log I(t) = mu log t + p log|log t| + c on t = 2^-n"""
    a, b = Fraction(str(alpha)), Fraction(str(beta))
    rows, values = [], []
    for n in exponents:
        t = 2.0 ** -n
        rows.append([math.log(t), math.log(abs(math.log(t))), 1.0])
        values.append(math.log(pushed_density(float(a), float(b), t)))
    (mu, p, _), *_ = np.linalg.lstsq(np.array(rows), np.array(values), rcond=None)
    return OracleFit(a, b, float(mu), float(p), bool(p > 0.5))
