"""JSON report serialization with exact-number discipline.

Rationals always serialize as "p/q" strings and integers beyond 2^53 as
decimal strings, so nothing exact ever rides through a float. Output key
order is fixed (sorted) which makes seeded reports byte-identical under
replay.
"""

from __future__ import annotations

import dataclasses
import json
from fractions import Fraction
from importlib import resources
from typing import Any

from .circle import CirclePoint
from .contfrac import RationalInterval

SCHEMA_ID = "cocycle-lab/report-v1"
_INT_CAP = 2**53


def to_jsonable(obj: Any) -> Any:
    if obj is None or isinstance(obj, (bool, str, float)):
        return obj
    if isinstance(obj, int):
        return obj if abs(obj) < _INT_CAP else str(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, RationalInterval):
        return {"lo": to_jsonable(obj.lo), "hi": to_jsonable(obj.hi)}
    if isinstance(obj, CirclePoint):
        return {"r": to_jsonable(obj.r), "m": to_jsonable(obj.m),
                "radius": to_jsonable(obj.radius)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return to_jsonable(obj.tolist())
    return repr(obj)


def render_report(manifest: dict, report: Any) -> str:
    doc = {"schema": SCHEMA_ID, "manifest": to_jsonable(manifest),
           "report": to_jsonable(report)}
    return json.dumps(doc, sort_keys=True, separators=(",", ": "), indent=1)


def load_schema() -> dict:
    text = resources.files("cocycle_lab").joinpath("schemas/report-v1.schema.json").read_text()
    return json.loads(text)
