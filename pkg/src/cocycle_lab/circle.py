"""Exact points on the circle R/Z.

A CirclePoint is r + m*alpha + [-radius, radius] mod 1 with r rational and
m integer. Lattice points (radius 0) admit exact, always-terminating
comparisons because r + m*alpha is irrational unless m = 0; decimal inputs
carry an explicit error radius and raise PrecisionExhausted when a
comparison falls inside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .contfrac import AlphaHandle, RationalInterval, max_refinement_depth
from .errors import IndexBeyondSpec, PrecisionExhausted

_ZERO = Fraction(0)


@dataclass(frozen=True)
class CirclePoint:
    r: Fraction
    m: int = 0
    radius: Fraction = _ZERO
    alpha: Optional[AlphaHandle] = None

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.m != 0 and self.alpha is None:
            raise ValueError("a point with an alpha multiple needs its AlphaHandle")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def rational(r) -> "CirclePoint":
        return CirclePoint(Fraction(r))

    @staticmethod
    def lattice(r, m: int, alpha: AlphaHandle) -> "CirclePoint":
        return CirclePoint(Fraction(r), m, _ZERO, alpha if m != 0 else alpha)

    @staticmethod
    def decimal(value, radius) -> "CirclePoint":
        return CirclePoint(Fraction(value), 0, Fraction(radius))

    @staticmethod
    def from_text(text: str, alpha: AlphaHandle) -> "CirclePoint":
        """Parse 'r:p/q', 'lat:r+m*alpha' or a bare decimal like '0.381966'."""
        text = text.strip()
        if text.startswith("r:"):
            return CirclePoint.rational(Fraction(text[2:]))
        if text.startswith("lat:"):
            body = text[4:].replace(" ", "")
            if "*alpha" not in body:
                raise ValueError(f"lattice point {text!r} must look like lat:r+m*alpha")
            head, _ = body.split("*alpha", 1)
            if "+" in head[1:]:
                cut = head.rfind("+")
                r_text, m_text = head[:cut], head[cut + 1:]
            elif "-" in head[1:]:
                cut = head.rfind("-")
                r_text, m_text = head[:cut], head[cut:]
            else:
                r_text, m_text = "0", head
            return CirclePoint.lattice(Fraction(r_text or "0"), int(m_text), alpha)
        if "." in text:
            digits = len(text.split(".", 1)[1])
            return CirclePoint.decimal(Fraction(text), Fraction(1, 2 * 10**digits))
        return CirclePoint.rational(Fraction(text))

    # -- arithmetic (exact; radii add) --------------------------------------

    def _merged_handle(self, other: "CirclePoint") -> Optional[AlphaHandle]:
        if self.alpha is not None and other.alpha is not None and self.alpha is not other.alpha:
            if self.alpha.spec != other.alpha.spec:
                raise ValueError("cannot combine points over different rotations")
        return self.alpha or other.alpha

    def __add__(self, other: "CirclePoint") -> "CirclePoint":
        return CirclePoint(self.r + other.r, self.m + other.m,
                           self.radius + other.radius, self._merged_handle(other))

    def __sub__(self, other: "CirclePoint") -> "CirclePoint":
        return CirclePoint(self.r - other.r, self.m - other.m,
                           self.radius + other.radius, self._merged_handle(other))

    def __neg__(self) -> "CirclePoint":
        return CirclePoint(-self.r, -self.m, self.radius, self.alpha)

    def scaled(self, a: int) -> "CirclePoint":
        return CirclePoint(self.r * a, self.m * a, self.radius * abs(a), self.alpha)

    @property
    def is_exact(self) -> bool:
        return self.radius == 0

    # -- value enclosures ----------------------------------------------------

    def value_interval(self, target_width: Fraction) -> RationalInterval:
        """Enclosure of the unreduced real r + m*alpha (plus radius)."""
        if self.m == 0:
            base = RationalInterval(self.r, self.r)
        else:
            base = self.alpha.value_interval(self.m, self.r, target_width)
        if self.radius:
            base = RationalInterval(base.lo - self.radius, base.hi + self.radius)
        return base

    def frac_interval(self, target_width: Fraction) -> RationalInterval:
        """Enclosure of the circle value {r + m*alpha}; midpoint lies in [0,1)."""
        iv = self.value_interval(target_width)
        k = math.floor(iv.mid)
        out = iv.shift(-k)
        if out.lo >= 1:
            out = out.shift(-1)
        elif out.hi <= 0 and not (out.lo == 0 and out.hi == 0):
            out = out.shift(1)  # wholly below 0: the value wraps to just under 1
        return out

    def norm_interval(self, target_width: Fraction) -> RationalInterval:
        """Enclosure of ||r + m*alpha|| (circle distance to 0)."""
        iv = self.value_interval(target_width)
        k = math.floor(iv.mid + Fraction(1, 2))
        c = iv.shift(-k)
        lo, hi = abs(c.lo), abs(c.hi)
        if c.lo <= 0 <= c.hi:
            return RationalInterval(_ZERO, min(max(lo, hi), Fraction(1, 2)))
        a, b = min(lo, hi), max(lo, hi)
        return RationalInterval(a, min(b, Fraction(1, 2)))

    def float_mod1(self) -> float:
        """Circle value as a double; reduction error below 2^-60."""
        f = float(self.frac_interval(Fraction(1, 2**62)).mid)
        return f if f < 1.0 else 0.0

    # -- exact predicates ----------------------------------------------------

    def is_zero(self) -> bool:
        """Exact test for the circle value 0."""
        if self.radius == 0:
            return self.m == 0 and self.r.denominator == 1
        if self.m == 0 and self.r.denominator == 1 and self.radius == 0:
            return True
        iv = self.norm_interval(Fraction(1, 2**40))
        if iv.lo > 0:
            return False
        raise PrecisionExhausted("circle point", "cannot separate from 0 within error radius")

    def same_point(self, other: "CirclePoint") -> bool:
        """Exact circle equality {self} == {other}."""
        return (self - other).is_zero()

    def compare_frac(self, other: "CirclePoint") -> int:
        """-1, 0, +1 comparing circle values in [0, 1)."""
        if self.same_point(other):
            return 0
        diff = _compare_nonequal(self, other)
        return diff

    def in_arc(self, start: "CirclePoint", end: "CirclePoint") -> bool:
        """Membership in the half-open arc [start, end) (left-closed)."""
        v = self - start
        if v.is_zero():
            return True
        w = end - start
        if w.is_zero():
            return False  # empty arc
        if self.same_point(end):
            return False
        return _compare_nonequal(v, w) < 0

    def __repr__(self):
        tail = f", radius={self.radius}" if self.radius else ""
        return f"CirclePoint({self.r}{'' if self.m == 0 else f' + {self.m}a'}{tail})"


def _compare_nonequal(x: CirclePoint, y: CirclePoint) -> int:
    """Compare circle values of two points known to be distinct."""
    width = Fraction(1, 2**24)
    floor_limit = Fraction(1, 2**20)
    for _ in range(max_refinement_depth()):
        ix = x.frac_interval(width)
        iy = y.frac_interval(width)
        # push intervals inside (0,1): a value exactly 0 was excluded upstream
        # unless the point itself is 0 mod 1, which frac_interval centers at 0.
        if ix.hi < iy.lo:
            return -1
        if iy.hi < ix.lo:
            return 1
        width /= 2**8
        if width < floor_limit and (x.radius or y.radius):
            gap = x.radius + y.radius
            if width < gap / 2**10:
                raise PrecisionExhausted(
                    "circle comparison", f"values within combined error radius {gap}"
                )
    raise IndexBeyondSpec("circle comparison exceeded the refinement depth cap")


def arc_length_interval(start: CirclePoint, end: CirclePoint,
                        target_width: Fraction) -> RationalInterval:
    """Enclosure of the length of the arc [start, end) (the value {end-start})."""
    return (end - start).frac_interval(target_width)
