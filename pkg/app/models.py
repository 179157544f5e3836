# app/models.py
from fractions import Fraction
from typing import Callable, Dict

from lib.atlas import Atlas, Chart, Transition
from lib.errors import DomainError, ManifestError
from lib.serialize import rational_text as _text


def half_line() -> Atlas:
    """[0, inf) near its boundary point"""
    return Atlas("half_line", (Chart("H", ("x",), 1, ((0, 1),)),), labels=(("H:x", "0"),))


def quadrant() -> Atlas:
    return Atlas("quadrant", (Chart("Q", ("x", "y"), 2, ((0, 1), (0, 1))),), labels=(("Q:x", "x=0"), ("Q:y", "y=0")))


def interval() -> Atlas:
    """[0, 1] with one chart at each end, glued by u = 1 - x"""
    left = Chart("L", ("x",), 1, ((0, 0.75),))
    right = Chart("R", ("u",), 1, ((0, 0.75),))
    flip = Transition.build("flip", left, right, ["(+ 1 (* -1 x))"], ["(+ 1 (* -1 u))"], ((0.25, 0.75),))
    return Atlas("interval", (left, right), (flip,), labels=(("L:x", "0"), ("R:u", "1")))


def circle() -> Atlas:
    """R/Z covered by two arcs"""
    a = Chart("S0", ("s",), 0, ((-0.1, 0.6),))
    b = Chart("S1", ("s",), 0, ((0.4, 1.1),))
    overlap = Transition.build("overlap", a, b, ["s"], ["s"], ((0.4, 0.6),))
    wrap = Transition.build("wrap", a, b, ["(+ s 1)"], ["(+ s -1)"], ((-0.1, 0.1),))
    return Atlas("circle", (a, b), (overlap, wrap))


def point() -> Atlas:
    return Atlas("point", (Chart("pt", (), 0, ()),))


def quotient_cylinder(alpha) -> Atlas:
    """[0, 1) x R modulo (x, y) ~ (x^alpha, y + 1); its boundary circle has holonomy alpha"""
    alpha = Fraction(str(alpha))
    if alpha <= 0:
        raise DomainError("alpha must be positive", alpha=alpha)
    a = Chart("A", ("x", "y"), 1, ((0, 1), (-0.1, 0.6)))
    b = Chart("B", ("x", "y"), 1, ((0, 1), (0.4, 1.1)))
    overlap = Transition.build("overlap", a, b, ["x", "y"], ["x", "y"], ((0, 1), (0.4, 0.6)))
    wrap = Transition.build(
        "wrap",
        a,
        b,
        [f"(pow x {_text(alpha)})", "(+ y 1)"],
        [f"(pow x {_text(1 / alpha)})", "(+ y -1)"],
        ((0, 1), (-0.1, 0.1)),
    )
    return Atlas(f"quotient_cylinder({_text(alpha)})", (a, b), (overlap, wrap), labels=(("A:x", "x=0"),))


MODEL_SPACES: Dict[str, Callable[..., Atlas]] = {
    "half_line": half_line,
    "quadrant": quadrant,
    "interval": interval,
    "circle": circle,
    "point": point,
    "quotient_cylinder": quotient_cylinder,
}


def model_space(name: str, **params) -> Atlas:
    try:
        factory = MODEL_SPACES[name]
    except KeyError:
        raise ManifestError(f"unknown model space {name!r}", known=",".join(sorted(MODEL_SPACES)))
    return factory(**params)
