"""Exact-arithmetic toolkit for step cocycles over irrational rotations."""

from .contfrac import (
    AlphaHandle,
    AlphaSpec,
    NormValue,
    RationalInterval,
    format_alpha_spec,
    golden_handle,
    parse_alpha_spec,
)
from .circle import CirclePoint
from .errors import (
    CocycleLabError,
    DegenerateParameter,
    IndexBeyondSpec,
    InvalidPlan,
    PrecisionExhausted,
    ShadowingGuard,
    SpecParseError,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaHandle",
    "AlphaSpec",
    "CirclePoint",
    "CocycleLabError",
    "DegenerateParameter",
    "IndexBeyondSpec",
    "InvalidPlan",
    "NormValue",
    "PrecisionExhausted",
    "RationalInterval",
    "ShadowingGuard",
    "SpecParseError",
    "format_alpha_spec",
    "golden_handle",
    "parse_alpha_spec",
    "__version__",
]
