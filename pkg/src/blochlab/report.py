"""JSON / CSV serialisation of run results."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from enum import Enum

import numpy as np

from .bloch import DIVERGENT
from .sampling import ShellSup
from .symbolic import Expr, SelfMapReport, unparse


def _float(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def to_jsonable(obj):
    """Plain JSON types; complex numbers become ``[re, im]``."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if obj is DIVERGENT:
        return "divergent"
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, Expr):
        return unparse(obj)
    if isinstance(obj, ShellSup):
        return {
            "index": obj.index,
            "delta_low": obj.delta_low,
            "delta_high": obj.delta_high,
            "count": obj.count,
            "sup": "empty" if obj.empty else _float(obj.sup),
        }
    if isinstance(obj, SelfMapReport):
        return {"ok": obj.ok, "max_modulus": _float(obj.max_modulus), "samples": obj.samples}
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(to_jsonable(k) if not isinstance(k, str) else k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


PROFILE_COLUMNS = ("shell_index", "delta_low", "delta_high", "sup", "count")


def profile_csv(profile: list[ShellSup]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_COLUMNS)
    for s in profile:
        w.writerow([s.index, repr(s.delta_low), repr(s.delta_high), "empty" if s.empty else repr(float(s.sup)), s.count])
    return buf.getvalue()
