"""
Generalized power/log series at one boundary face.

A series is a finite sum of terms c * x**alpha * (log x)**b that is exact for
exponents below its cutoff ``prec``. Coefficients are slowly varying sympy
expressions: the other variables, LOGLOG = log(-log x), and sin/cos of
log-type arguments (written with LOG = log x).
"""
import cmath
import logging
import math
from fractions import Fraction
from typing import Dict, Iterator, Optional, Tuple, Union

import sympy as sp

from .errors import DomainError, UnsupportedNode

logger = logging.getLogger(__name__)

LOG = sp.Symbol("L_", negative=True)
LOGLOG = sp.Symbol("LL_", real=True)

Key = Tuple[Fraction, int]
Cutoff = Union[Fraction, float]
INF = math.inf

LOG_DEPTH = 8  # log powers kept per exponent
MAX_TERMS = 24  # cap on terms of a composed power series
DEFAULT_WINDOW = Fraction(4)


class NeedPrecision(Exception):
    """Raised when cancellation leaves nothing known inside the window."""


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, sp.Rational):
        return Fraction(int(value.p), int(value.q))
    raise UnsupportedNode(f"exponent {value} is not rational")


def _probe_value(symbol: sp.Symbol, probe: int) -> float:
    if symbol == LOG:
        return (-7.31, -19.7)[probe]
    if symbol == LOGLOG:
        return (1.93, 2.87)[probe]
    if symbol.is_positive:
        return (0.4137, 0.7719)[probe]
    return (0.2963, -0.5871)[probe]


def is_zero(coeff: sp.Expr) -> bool:
    """Zero test for slow coefficients: structural first, then at two generic points."""
    if coeff == 0:
        return True
    if coeff.is_number and coeff.is_zero is False:
        return False
    for probe in (0, 1):
        subs = {s: _probe_value(s, probe) for s in coeff.free_symbols}
        try:
            value = complex(sp.N(coeff.subs(subs), 30))
        except (TypeError, ValueError):
            return False
        if not cmath.isfinite(value) or abs(value) > 1e-20:
            return False
    return True


class GSeries:
    __slots__ = ("terms", "prec")

    def __init__(
        self, terms: Optional[Dict[Key, sp.Expr]] = None, prec: Cutoff = INF, clean: bool = True
    ):
        self.prec = prec
        kept: Dict[Key, sp.Expr] = {}
        for key, coeff in (terms or {}).items():
            if key[0] >= prec:
                continue
            if clean:
                coeff = sp.expand(coeff)
                if is_zero(coeff):
                    continue
            kept[key] = coeff
        self.terms = _trim_logs(kept)

    @property
    def valuation(self) -> Cutoff:
        return min((key[0] for key in self.terms), default=self.prec)

    @property
    def is_exact_zero(self) -> bool:
        return not self.terms and self.prec == INF

    def leading(self) -> Tuple[Fraction, int, sp.Expr]:
        if not self.terms:
            raise NeedPrecision()
        alpha = min(key[0] for key in self.terms)
        b = max(key[1] for key in self.terms if key[0] == alpha)
        return alpha, b, self.terms[(alpha, b)]

    def items(self) -> Iterator[Tuple[Key, sp.Expr]]:
        return iter(sorted(self.terms.items(), key=lambda kv: (kv[0][0], -kv[0][1])))

    def as_expr(self, x: sp.Symbol) -> sp.Expr:
        back = {LOG: sp.log(x), LOGLOG: sp.log(-sp.log(x))}
        total = sp.Integer(0)
        for (alpha, b), coeff in self.items():
            total += coeff.xreplace(back) * x ** sp.Rational(alpha.numerator, alpha.denominator) * sp.log(x) ** b
        return total

    def __repr__(self) -> str:
        body = " + ".join(f"({c})*x^{a}*L^{b}" for (a, b), c in self.items())
        return f"GSeries({body or '0'}; prec={self.prec})"


def _trim_logs(terms: Dict[Key, sp.Expr]) -> Dict[Key, sp.Expr]:
    by_alpha: Dict[Fraction, list] = {}
    for key in terms:
        by_alpha.setdefault(key[0], []).append(key[1])
    kept = {}
    for alpha, powers in by_alpha.items():
        for b in sorted(powers, reverse=True)[:LOG_DEPTH]:
            kept[(alpha, b)] = terms[(alpha, b)]
    return kept


def _finish(terms: Dict[Key, sp.Expr], prec: Cutoff, window: Fraction) -> GSeries:
    series = GSeries(terms, prec)
    if series.terms:
        capped = min(series.prec, series.valuation + window)
        if capped < series.prec:
            series = GSeries(series.terms, capped, clean=False)
    return series


def constant(coeff) -> GSeries:
    coeff = sp.sympify(coeff)
    if coeff == 0:
        return GSeries()
    return GSeries({(Fraction(0), 0): coeff}, clean=False)


def monomial(alpha: Fraction, b: int = 0, coeff=1) -> GSeries:
    return GSeries({(Fraction(alpha), int(b)): sp.sympify(coeff)}, clean=False)


def add(a: GSeries, b: GSeries, window: Fraction) -> GSeries:
    terms = dict(a.terms)
    for key, coeff in b.terms.items():
        terms[key] = terms[key] + coeff if key in terms else coeff
    return _finish(terms, min(a.prec, b.prec), window)


def mul(a: GSeries, b: GSeries, window: Fraction) -> GSeries:
    if a.is_exact_zero or b.is_exact_zero:
        return GSeries()
    prec = min(a.prec + b.valuation, b.prec + a.valuation)
    terms: Dict[Key, sp.Expr] = {}
    for (a1, b1), c1 in a.terms.items():
        for (a2, b2), c2 in b.terms.items():
            alpha = a1 + a2
            if alpha >= prec:
                continue
            key = (alpha, b1 + b2)
            terms[key] = terms[key] + c1 * c2 if key in terms else c1 * c2
    return _finish(terms, prec, window)


def scale(a: GSeries, coeff) -> GSeries:
    coeff = sp.sympify(coeff)
    return GSeries({k: c * coeff for k, c in a.terms.items()}, a.prec)


def _relative(s: GSeries) -> Tuple[Fraction, int, sp.Expr, GSeries]:
    """Split s = c x^alpha L^b (1 + r) and return (alpha, b, c, r)."""
    alpha, b, c = s.leading()
    rest = {
        (a - alpha, bb - b): cc / c for (a, bb), cc in s.terms.items() if (a, bb) != (alpha, b)
    }
    return alpha, b, c, GSeries(rest, s.prec - alpha)


def _power_series(r: GSeries, coefficients, window: Fraction) -> GSeries:
    """Sum of coefficients(n) * r**n for a small series r (no constant term)."""
    if not r.terms:
        out = constant(coefficients(0))
        return GSeries(out.terms, r.prec, clean=False)
    positive = [key[0] for key in r.terms if key[0] > 0]
    has_logs = any(key[0] == 0 for key in r.terms)
    steps = LOG_DEPTH if has_logs else 0
    if positive:
        steps += int(math.ceil(window / min(positive)))
    steps = max(1, min(steps, MAX_TERMS))
    total = constant(coefficients(0))
    power = constant(1)
    for n in range(1, steps + 1):
        power = mul(power, r, window)
        if not power.terms:
            break
        c = coefficients(n)
        if c != 0:
            total = add(total, scale(power, c), window)
    if positive and not has_logs:
        bound = (steps + 1) * min(positive)
        if bound < total.prec:
            total = GSeries(total.terms, bound, clean=False)
    return total


def inverse(s: GSeries, window: Fraction) -> GSeries:
    if s.is_exact_zero:
        raise DomainError("division by an identically zero expression")
    alpha, b, c, r = _relative(s)
    geometric = _power_series(r, lambda n: (-1) ** n, window)
    return mul(monomial(-alpha, -b, 1 / c), geometric, window)


def _binomial(q: Fraction, n: int) -> Fraction:
    out = Fraction(1)
    for i in range(n):
        out *= (q - i) / (i + 1)
    return out


def power(s: GSeries, q: Fraction, window: Fraction) -> GSeries:
    if q == 0:
        return constant(1)
    if q.denominator == 1 and q < 0:
        return power(inverse(s, window), -q, window)
    if q.denominator == 1 and q <= 16:
        result, base, k = constant(1), s, int(q)
        while k:
            if k & 1:
                result = mul(result, base, window)
            k >>= 1
            if k:
                base = mul(base, base, window)
        return result
    alpha, b, c, r = _relative(s)
    bq = b * q
    if bq.denominator != 1:
        raise UnsupportedNode("fractional power of a logarithm")
    sign = sp.Integer(-1) ** b
    lead = sp.Pow(c * sign, sp.Rational(q.numerator, q.denominator)) * sp.Integer(-1) ** int(bq)
    series = _power_series(r, lambda n: sp.Rational(_binomial(q, n)), window)
    return mul(monomial(alpha * q, int(bq), lead), series, window)


def _split_slow(s: GSeries) -> Tuple[Dict[Key, sp.Expr], GSeries]:
    """Separate non-decaying terms (alpha = 0, b >= 0) from the small remainder."""
    if any(key[0] < 0 for key in s.terms):
        raise UnsupportedNode("argument is unbounded at the face")
    if s.prec <= 0:
        raise NeedPrecision()
    slow = {k: c for k, c in s.terms.items() if k[0] == 0 and k[1] >= 0}
    small = {k: c for k, c in s.terms.items() if k not in slow}
    return slow, GSeries(small, s.prec, clean=False)


def exp(s: GSeries, window: Fraction) -> GSeries:
    slow, small = _split_slow(s)
    c0 = sp.Integer(0)
    shift = Fraction(0)
    for (alpha, b), coeff in slow.items():
        if b == 0:
            c0 = coeff
        elif b == 1 and coeff.is_Rational:
            shift = to_fraction(coeff)
        else:
            raise UnsupportedNode("exp of a log term with a non-rational coefficient")
    series = _power_series(small, lambda n: sp.Rational(1, math.factorial(n)), window)
    return mul(monomial(shift, 0, sp.exp(c0)), series, window)


def log(s: GSeries, window: Fraction) -> GSeries:
    if s.is_exact_zero:
        raise DomainError("logarithm of an identically zero expression")
    alpha, b, c, r = _relative(s)
    head = sp.log(c * sp.Integer(-1) ** b) + b * LOGLOG
    base = constant(head)
    if alpha != 0:
        base = add(base, monomial(Fraction(0), 1, sp.Rational(alpha.numerator, alpha.denominator)), window)
    tail = _power_series(r, lambda n: 0 if n == 0 else sp.Rational((-1) ** (n + 1), n), window)
    return add(base, tail, window)


def trig(s: GSeries, func, window: Fraction) -> GSeries:
    slow, small = _split_slow(s)
    phase = sp.Add(*[coeff * LOG**b for (alpha, b), coeff in slow.items()])
    cos_small = _power_series(
        small, lambda n: 0 if n % 2 else sp.Rational((-1) ** (n // 2), math.factorial(n)), window
    )
    sin_small = _power_series(
        small, lambda n: sp.Rational((-1) ** (n // 2), math.factorial(n)) if n % 2 else 0, window
    )
    if func is sp.sin:
        first, second = scale(cos_small, sp.sin(phase)), scale(sin_small, sp.cos(phase))
    else:
        first, second = scale(cos_small, sp.cos(phase)), scale(sin_small, -sp.sin(phase))
    return add(first, second, window)


def expand(expr: sp.Expr, x: sp.Symbol, window: Fraction = DEFAULT_WINDOW) -> GSeries:
    """Expand ``expr`` at the face x = 0."""
    if not expr.has(x):
        return constant(expr)
    if expr == x:
        return monomial(Fraction(1))
    if expr.is_Add:
        out = GSeries()
        for arg in expr.args:
            out = add(out, expand(arg, x, window), window)
        return out
    if expr.is_Mul:
        out = constant(1)
        for arg in expr.args:
            out = mul(out, expand(arg, x, window), window)
        return out
    if expr.is_Pow:
        base, exponent = expr.args
        if exponent.has(x) or not exponent.is_Rational:
            raise UnsupportedNode(f"power with exponent {exponent}")
        q = to_fraction(exponent)
        if base == x:
            return monomial(q)
        if isinstance(base, sp.log) and base.args[0] == x and q.denominator == 1:
            return monomial(Fraction(0), int(q))
        return power(expand(base, x, window), q, window)
    if isinstance(expr, sp.exp):
        return exp(expand(expr.args[0], x, window), window)
    if isinstance(expr, sp.log):
        if expr.args[0] == x:
            return monomial(Fraction(0), 1)
        return log(expand(expr.args[0], x, window), window)
    if isinstance(expr, (sp.sin, sp.cos)):
        return trig(expand(expr.args[0], x, window), type(expr), window)
    raise UnsupportedNode(f"{type(expr).__name__} is outside the expression algebra")
