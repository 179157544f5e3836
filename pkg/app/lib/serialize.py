import math
from fractions import Fraction
from typing import Any

import numpy as np
import orjson
import sympy as sp
from pydantic import BaseModel

from .expr import BExpr, to_sexpr

OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


def rational_text(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def _float(value: float) -> Any:
    if math.isfinite(value):
        return value
    if math.isnan(value):
        return "nan"
    return "inf" if value > 0 else "-inf"


def plain(obj: Any) -> Any:
    """Reduce report values to JSON types; rationals become "p/q" strings"""
    if isinstance(obj, BaseModel):
        return plain(obj.model_dump())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, Fraction):
        return rational_text(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(float(obj.real)), _float(float(obj.imag))]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, BExpr):
        return obj.to_sexpr()
    if isinstance(obj, sp.Basic):
        if obj.is_Rational:
            return rational_text(Fraction(int(obj.p), int(obj.q)))
        return to_sexpr(obj)
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [plain(v) for v in obj]
        return sorted(items, key=orjson.dumps) if isinstance(obj, (set, frozenset)) else items
    if hasattr(obj, "as_dict"):
        return plain(obj.as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> bytes:
    return orjson.dumps(plain(obj), option=OPTIONS)


def loads(data: bytes) -> Any:
    return orjson.loads(data)
