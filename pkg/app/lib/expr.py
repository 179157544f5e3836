"""
Boundary-asymptotic expressions on local models [0,inf)^k x R^(m-k).

Boundary coordinates are sympy symbols declared positive, interior ones real.
Everything here is a pure function of immutable ``BExpr`` values.
"""
import enum
import functools
import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import sympy as sp

from . import asymptotics
from .asymptotics import INF, LOG, LOGLOG
from .env import env_loader, settings_cache
from .errors import DomainError, Indeterminate, ParseError, UnsupportedNode

logger = logging.getLogger(__name__)

Exponent = Union[Fraction, float]

FIT_EXPONENTS = range(10, 41)
SLOPE_TOLERANCE = 1e-3
LEVEL_TOLERANCE = 1e-2
WINDOWS = (Fraction(4), Fraction(8), Fraction(16))
BOUNDARY_PROBE = 0.5
INTERIOR_PROBE = 1 / 3

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_UNARY = {"log": sp.log, "exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "sqrt": sp.sqrt}


@functools.lru_cache(maxsize=None)
def boundary_symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, positive=True)


@functools.lru_cache(maxsize=None)
def interior_symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, real=True)


def _validate(expr: sp.Expr) -> None:
    for node in sp.preorder_traversal(expr):
        if node.is_Symbol or node.is_Rational or node in (sp.pi, sp.E):
            continue
        if isinstance(node, (sp.Add, sp.Mul, sp.exp, sp.log, sp.sin, sp.cos)):
            continue
        if node.is_Pow:
            if not node.exp.is_Rational:
                raise UnsupportedNode(f"power with non-rational exponent {node.exp}")
            continue
        if node.is_Float:
            raise UnsupportedNode(f"floating constant {node}; use an exact rational")
        raise UnsupportedNode(f"{type(node).__name__} is outside the expression algebra")


@dataclass(frozen=True)
class BExpr:
    """Expression together with its declared boundary and interior variables"""

    expr: sp.Expr
    boundary: Tuple[str, ...] = ("x",)
    interior: Tuple[str, ...] = ()
    divisors: Tuple[sp.Expr, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(self.boundary))
        object.__setattr__(self, "interior", tuple(self.interior))
        clash = set(self.boundary) & set(self.interior)
        if clash:
            raise ParseError(f"variables declared twice: {sorted(clash)}")
        expr = sp.sympify(self.expr)
        known = {s.name: s for s in self.symbols}
        stray = sorted(s.name for s in expr.free_symbols if s.name not in known)
        if stray:
            raise ParseError(f"undeclared variables {stray}")
        expr = expr.xreplace({s: known[s.name] for s in expr.free_symbols})
        _validate(expr)
        object.__setattr__(self, "expr", expr)

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.boundary + self.interior

    @property
    def symbols(self) -> Tuple[sp.Symbol, ...]:
        return tuple(boundary_symbol(n) for n in self.boundary) + tuple(
            interior_symbol(n) for n in self.interior
        )

    @property
    def depends_on(self) -> frozenset:
        return frozenset(s.name for s in self.expr.free_symbols)

    def symbol(self, name: str) -> sp.Symbol:
        if name in self.boundary:
            return boundary_symbol(name)
        if name in self.interior:
            return interior_symbol(name)
        raise DomainError(f"unknown variable {name!r}", variables=",".join(self.variables))

    def with_expr(self, expr, divisors: Sequence[sp.Expr] = ()) -> "BExpr":
        return BExpr(sp.sympify(expr), self.boundary, self.interior, self.divisors + tuple(divisors))

    def __add__(self, other: "BExpr") -> "BExpr":
        return self.with_expr(self.expr + _raw(other))

    def __sub__(self, other: "BExpr") -> "BExpr":
        return self.with_expr(self.expr - _raw(other))

    def __mul__(self, other: "BExpr") -> "BExpr":
        return self.with_expr(self.expr * _raw(other))

    def __truediv__(self, other: "BExpr") -> "BExpr":
        denominator = _raw(other)
        return self.with_expr(self.expr / denominator, divisors=(denominator,))

    def __neg__(self) -> "BExpr":
        return self.with_expr(-self.expr)

    def is_zero(self) -> bool:
        return self.expr == 0 or sp.expand(self.expr) == 0 or sp.simplify(self.expr) == 0

    def subs(self, mapping: Mapping[str, Union["BExpr", sp.Expr]], target: "BExpr" = None) -> "BExpr":
        """Substitute variables; the result lives in ``target``'s variables when given"""
        replace = {self.symbol(k): _raw(v) for k, v in mapping.items()}
        expr = self.expr.xreplace(replace)
        base = target if target is not None else self
        return base.with_expr(expr)

    def restrict(self, name: str) -> "BExpr":
        """Restriction to the face {name = 0}, in the same variables"""
        return _restrict(self, name)

    def to_sexpr(self) -> str:
        return to_sexpr(self.expr)

    def evaluate(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def __str__(self) -> str:
        return self.to_sexpr()


def _raw(value) -> sp.Expr:
    if isinstance(value, BExpr):
        return value.expr
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    return sp.sympify(value)


def const(value, boundary: Sequence[str] = ("x",), interior: Sequence[str] = ()) -> BExpr:
    return BExpr(_raw(value), tuple(boundary), tuple(interior))


# ----- s-expression text form -----


class _Reader:
    def __init__(self, text: str, symbols: Dict[str, sp.Symbol], boundary: Sequence[str]):
        self.tokens = _TOKEN.findall(text)
        self.pos = 0
        self.symbols = symbols
        self.boundary = set(boundary)
        self.divisors: List[sp.Expr] = []

    def next(self) -> str:
        if self.pos >= len(self.tokens):
            raise ParseError("unexpected end of expression")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def read(self) -> sp.Expr:
        token = self.next()
        if token == ")":
            raise ParseError("unbalanced ')'", position=self.pos)
        if token != "(":
            return self.atom(token)
        op = self.next()
        args = []
        while True:
            if self.pos >= len(self.tokens):
                raise ParseError(f"unclosed '({op}'")
            if self.tokens[self.pos] == ")":
                self.pos += 1
                break
            args.append(self.read())
        return self.apply(op, args)

    def atom(self, token: str) -> sp.Expr:
        if token in self.symbols:
            return self.symbols[token]
        if token == "pi":
            return sp.pi
        try:
            value = Fraction(token)
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"unknown symbol {token!r}")
        return sp.Rational(value.numerator, value.denominator)

    def apply(self, op: str, args: List[sp.Expr]) -> sp.Expr:
        if not args:
            raise ParseError(f"operator {op!r} needs arguments")
        if op == "+":
            return sp.Add(*args)
        if op == "*":
            return sp.Mul(*args)
        if op == "-":
            return -args[0] if len(args) == 1 else args[0] - sp.Add(*args[1:])
        if op == "/":
            if len(args) < 2:
                raise ParseError("'/' needs a numerator and a denominator")
            denominator = sp.Mul(*args[1:])
            if denominator == 0:
                raise ParseError("division by literal zero")
            self.divisors.append(denominator)
            return args[0] / denominator
        if op == "pow":
            if len(args) != 2 or not args[1].is_Rational:
                raise ParseError("'pow' takes a base and a rational exponent")
            return sp.Pow(args[0], args[1])
        if op == "loglog":
            if len(args) != 1 or not (args[0].is_Symbol and args[0].name in self.boundary):
                raise ParseError("'loglog' applies to a boundary variable")
            return sp.log(-sp.log(args[0]))
        if op in _UNARY:
            if len(args) != 1:
                raise ParseError(f"{op!r} takes one argument")
            return _UNARY[op](args[0])
        raise ParseError(f"unknown operator {op!r}")


def parse(text: str, boundary: Sequence[str] = ("x",), interior: Sequence[str] = ()) -> BExpr:
    """Parse the prefix s-expression form, e.g. ``(* (pow x 1/2) (sin (log x)))``"""
    boundary, interior = tuple(boundary), tuple(interior)
    symbols = {n: boundary_symbol(n) for n in boundary}
    symbols.update({n: interior_symbol(n) for n in interior})
    reader = _Reader(text, symbols, boundary)
    expr = reader.read()
    if reader.pos != len(reader.tokens):
        raise ParseError("trailing tokens after expression", text=text)
    return BExpr(expr, boundary, interior, tuple(reader.divisors))


def _loglog_of(arg: sp.Expr) -> Optional[sp.Symbol]:
    if len(arg.free_symbols) == 1:
        (s,) = arg.free_symbols
        if arg == -sp.log(s):
            return s
    return None


def to_sexpr(expr) -> str:
    if isinstance(expr, BExpr):
        expr = expr.expr
    if expr.is_Integer:
        return str(int(expr))
    if expr.is_Rational:
        return f"{expr.p}/{expr.q}"
    if expr is sp.pi:
        return "pi"
    if expr is sp.E:
        return "(exp 1)"
    if expr.is_Symbol:
        return expr.name
    if expr.is_Add:
        return "(+ " + " ".join(to_sexpr(a) for a in expr.args) + ")"
    if expr.is_Mul:
        return "(* " + " ".join(to_sexpr(a) for a in expr.args) + ")"
    if expr.is_Pow:
        return f"(pow {to_sexpr(expr.base)} {to_sexpr(expr.exp)})"
    if isinstance(expr, sp.log):
        inner = _loglog_of(expr.args[0])
        if inner is not None:
            return f"(loglog {inner.name})"
        return f"(log {to_sexpr(expr.args[0])})"
    for name in ("exp", "sin", "cos"):
        if isinstance(expr, getattr(sp, name)):
            return f"({name} {to_sexpr(expr.args[0])})"
    raise UnsupportedNode(f"cannot serialize {type(expr).__name__}")


# ----- b-derivatives -----


def b_derivative(e: BExpr, var: Union[str, int]) -> BExpr:
    """x d/dx for a boundary variable, d/dy for an interior one"""
    name = e.variables[var] if isinstance(var, int) else var
    s = e.symbol(name)
    d = sp.diff(e.expr, s)
    if name in e.boundary:
        d = s * d
    return e.with_expr(sp.expand(d))


def iterated_b_derivatives(e: BExpr, order: int) -> Dict[Tuple[int, ...], BExpr]:
    """All b-derivatives indexed by multi-index up to total ``order`` (they commute)"""
    m = len(e.variables)
    out: Dict[Tuple[int, ...], BExpr] = {tuple([0] * m): e}
    frontier = [tuple([0] * m)]
    for _ in range(order):
        nxt = []
        for beta in frontier:
            # extend only at or after the last nonzero slot so each index is built once
            last = max((i for i, b in enumerate(beta) if b), default=0)
            for i in range(last, m):
                child = tuple(b + (j == i) for j, b in enumerate(beta))
                parent = out[beta]
                out[child] = parent if parent.expr == 0 else b_derivative(parent, i)
                nxt.append(child)
        frontier = nxt
    return out


# ----- leading behaviour -----


@dataclass(frozen=True)
class LeadingBehavior:
    face: str
    alpha: Exponent
    b: int
    coeff: sp.Expr
    raw_coeff: sp.Expr = field(compare=False, repr=False)
    is_zero: bool = False

    @property
    def continuous(self) -> bool:
        """Whether the expression extends continuously to the face"""
        if self.is_zero or self.alpha > 0:
            return True
        if self.alpha < 0:
            return False
        if self.b < 0:
            return True
        return self.b == 0 and _has_face_limit(self.raw_coeff)

    @property
    def decays(self) -> bool:
        return self.is_zero or self.alpha > 0

    def as_dict(self) -> dict:
        return {
            "face": self.face,
            "alpha": "-inf" if self.is_zero else self.alpha,
            "log_power": self.b,
            "coeff": to_sexpr(self.coeff) if not self.is_zero else "0",
        }


def _has_face_limit(coeff: sp.Expr) -> bool:
    try:
        _face_limit(coeff)
    except DomainError:
        return False
    return True


def _face_limit(coeff: sp.Expr) -> sp.Expr:
    if coeff.has(LOG):
        coeff = sp.simplify(coeff)
        if coeff.has(LOG):
            raise DomainError("leading coefficient oscillates at the face")
    if coeff.has(LOGLOG):
        u = sp.Symbol("u", positive=True)
        limit = sp.limit(coeff.xreplace({LOGLOG: u}), u, sp.oo)
        if isinstance(limit, sp.AccumBounds) or limit.has(sp.oo, -sp.oo, sp.zoo, sp.nan):
            raise DomainError("leading coefficient has no limit at the face")
        return limit
    return coeff


def _probe_point(e: BExpr, face: str, point: Optional[Mapping[str, float]]) -> Dict[sp.Symbol, float]:
    values = {}
    for name in e.variables:
        if name == face:
            continue
        default = BOUNDARY_PROBE if name in e.boundary else INTERIOR_PROBE
        values[e.symbol(name)] = float((point or {}).get(name, default))
    return values


def _verify_fit(e: BExpr, x: sp.Symbol, approx: sp.Expr, others: Dict[sp.Symbol, float]) -> float:
    """Fit log|e/approx| against log x on x = 2^-n; return the fitted slope"""
    args = [x] + list(others)
    exact = sp.lambdify(args, e.expr, "mpmath")
    model = sp.lambdify(args, approx, "mpmath")
    logs_x, logs_q = [], []
    with mpmath.workdps(env_loader.BCALC_PRECISION):
        rest = [mpmath.mpf(v) for v in others.values()]
        for n in FIT_EXPONENTS:
            xv = mpmath.mpf(2) ** -n
            try:
                q = exact(xv, *rest) / model(xv, *rest)
            except ZeroDivisionError:
                continue
            q = complex(q)
            if q.real <= 0 or abs(q.imag) > 1e-9 * abs(q.real):
                raise Indeterminate("expansion has the wrong sign near the face", face=x.name)
            logs_x.append(-n * math.log(2))
            logs_q.append(math.log(q.real))
    if len(logs_x) < 5:
        raise Indeterminate("too few usable samples for the log-log fit", face=x.name)
    slope, _ = np.polyfit(logs_x, logs_q, 1)
    level = float(np.median(np.abs(logs_q)))
    if abs(slope) > SLOPE_TOLERANCE or level > LEVEL_TOLERANCE:
        raise Indeterminate(
            f"log-log fit residual too large (slope {slope:.2e}, level {level:.2e})", face=x.name
        )
    return float(slope)


@settings_cache(maxsize=8192)
def _leading(e: BExpr, face: str, point: Optional[Tuple[Tuple[str, float], ...]], verify: bool):
    x = e.symbol(face)
    if face not in e.boundary:
        raise DomainError(f"{face!r} is not a boundary variable")
    if e.expr == 0:
        return LeadingBehavior(face, -INF, 0, sp.Integer(0), sp.Integer(0), is_zero=True)
    if not e.expr.has(x):
        return LeadingBehavior(face, Fraction(0), 0, e.expr, e.expr)
    series = None
    for window in WINDOWS:
        try:
            series = asymptotics.expand(e.expr, x, window)
        except asymptotics.NeedPrecision:
            continue
        if series.terms or series.is_exact_zero:
            break
    if series is None or not series.terms:
        if series is not None and series.is_exact_zero or sp.simplify(e.expr) == 0:
            return LeadingBehavior(face, -INF, 0, sp.Integer(0), sp.Integer(0), is_zero=True)
        raise Indeterminate("cancellation exhausted the expansion window", face=face)
    alpha, b, raw = series.leading()
    if verify:
        _verify_fit(e, x, series.as_expr(x), _probe_point(e, face, dict(point or ())))
    back = {LOG: sp.log(x), LOGLOG: sp.log(-sp.log(x))}
    return LeadingBehavior(face, alpha, b, raw.xreplace(back), raw)


def leading_behavior(
    e: BExpr, face: Union[str, int] = 0, point: Optional[Mapping[str, float]] = None, verify: bool = True
) -> LeadingBehavior:
    """Leading term coeff * x^alpha * (log x)^b of ``e`` as the face variable tends to 0"""
    name = e.boundary[face] if isinstance(face, int) else face
    frozen = tuple(sorted(point.items())) if point else None
    return _leading(e, name, frozen, verify)


# ----- evaluation -----


@functools.lru_cache(maxsize=4096)
def _restrict(e: BExpr, name: str) -> BExpr:
    if name not in e.depends_on:
        return e
    lead = leading_behavior(e, name)
    if lead.is_zero or lead.alpha > 0 or (lead.alpha == 0 and lead.b < 0):
        return e.with_expr(0)
    if lead.alpha < 0 or lead.b > 0:
        raise DomainError("expression is unbounded at the face", face=name, expr=e.to_sexpr())
    return e.with_expr(_face_limit(lead.raw_coeff))


@functools.lru_cache(maxsize=4096)
def _numeric(expr: sp.Expr, symbols: Tuple[sp.Symbol, ...]):
    return sp.lambdify(symbols, expr, "numpy")


def _coerce(e: BExpr, point: Sequence[float]) -> Tuple[float, ...]:
    values = tuple(float(v) for v in point)
    if len(values) != len(e.variables):
        raise DomainError(f"expected {len(e.variables)} coordinates, got {len(values)}")
    for name, v in zip(e.boundary, values):
        if v < 0:
            raise DomainError("negative boundary coordinate", variable=name, value=v)
    return values


def evaluate(e: BExpr, point: Sequence[float]) -> float:
    """Value at a point; boundary values use the face-restriction limits"""
    values = _coerce(e, point)
    for name, v in zip(e.boundary, values):
        if v == 0 and name in e.depends_on:
            return evaluate(e.restrict(name), values)
    with np.errstate(all="ignore"):
        value = complex(_numeric(e.expr, e.symbols)(*values))
    if not math.isfinite(value.real) or abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        raise DomainError("expression is undefined at the point", point=values, expr=e.to_sexpr())
    return value.real


def evaluate_many(e: BExpr, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k = len(e.boundary)
    fast = np.all(points[:, :k] > 0, axis=1) if k else np.ones(len(points), dtype=bool)
    out = np.empty(len(points))
    if fast.any():
        with np.errstate(all="ignore"):
            values = _numeric(e.expr, e.symbols)(*points[fast].T)
        values = np.broadcast_to(np.asarray(values, dtype=complex), (int(fast.sum()),))
        if not np.all(np.isfinite(values.real)):
            raise DomainError("expression is undefined on part of the sample", expr=e.to_sexpr())
        out[fast] = values.real
    for i in np.flatnonzero(~fast):
        out[i] = evaluate(e, points[i])
    return out


def check_divisors(e: BExpr, points: np.ndarray) -> None:
    """Raise DomainError if a recorded denominator vanishes on the sample"""
    for divisor in e.divisors:
        values = evaluate_many(e.with_expr(divisor), points)
        if np.any(np.abs(values) < 1e-14):
            raise DomainError("denominator vanishes on the sample grid", divisor=to_sexpr(divisor))


# ----- smoothness classification -----


class SmoothnessClass(str, enum.Enum):
    ASmooth = "a-smooth"
    RSmoothNotA = "r-smooth-not-a"
    RDifferentiableOnly = "r-differentiable-only"
    NotRDifferentiable = "not-r-differentiable"

    @property
    def rank(self) -> int:
        """3 for a-smooth down to 0; larger is smoother"""
        return len(SmoothnessClass) - 1 - list(SmoothnessClass).index(self)

    @property
    def r_smooth(self) -> bool:
        return self in (SmoothnessClass.ASmooth, SmoothnessClass.RSmoothNotA)


@dataclass(frozen=True)
class Witness:
    derivative: Tuple[int, ...]
    face: str
    alpha: Exponent
    b: int
    continuous: bool
    decays: bool

    def as_dict(self) -> dict:
        return {
            "derivative": list(self.derivative),
            "face": self.face,
            "alpha": "-inf" if self.alpha == -INF else self.alpha,
            "log_power": self.b,
            "continuous": self.continuous,
            "decays": self.decays,
        }


@dataclass(frozen=True)
class SmoothnessReport:
    verdict: SmoothnessClass
    order: int
    witnesses: Tuple[Witness, ...]
    log_decay: bool = False

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "order": self.order,
            "log_decay": self.log_decay,
            "witnesses": [w.as_dict() for w in self.witnesses],
        }


def classify_function(
    e: BExpr, order: Optional[int] = None, point: Optional[Mapping[str, float]] = None
) -> SmoothnessReport:
    """Classify ``e`` from the leading behaviour of its b-derivatives up to ``order``"""
    order = env_loader.BCALC_ORDER if order is None else order
    witnesses = []
    for beta, d in iterated_b_derivatives(e, order).items():
        for i, face in enumerate(e.boundary):
            lead = leading_behavior(d, face, point)
            witnesses.append(
                Witness(beta, face, lead.alpha, lead.b, lead.continuous, lead.decays or beta[i] == 0)
            )
    broken = [sum(w.derivative) for w in witnesses if not w.continuous]
    slow = [w for w in witnesses if not w.decays]
    log_decay = False
    if broken and min(broken) <= 1:
        verdict = SmoothnessClass.NotRDifferentiable
    elif broken:
        verdict = SmoothnessClass.RDifferentiableOnly
    elif slow:
        verdict = SmoothnessClass.RSmoothNotA
        log_decay = all(w.alpha == 0 and w.b < 0 for w in slow)
    else:
        verdict = SmoothnessClass.ASmooth
    logger.debug("classified %s as %s at order %d", e.to_sexpr(), verdict.value, order)
    return SmoothnessReport(verdict, order, tuple(witnesses), log_decay)
