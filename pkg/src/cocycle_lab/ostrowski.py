"""Ostrowski expansion in the basis {q_j * alpha} and digit-plan machinery.

A circle point beta is written beta = sum_j b_j q_j alpha mod 1. Digits are
indexed from 0 (q_0 = 1, so b_0 is the plain alpha-translate digit), which
matches how the multiplicative-equation conditions consume them.

Greedy extraction works on the signed remainder and the exact basis numbers
theta_j = q_j alpha - p_j (|theta_j| = ||q_j alpha|| for j >= 1), keeping the
remainder as an exact r + m*alpha pair, so lattice inputs round-trip with a
zero or exactly-known tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from ._expr import parse_int_expr
from .circle import CirclePoint
from .contfrac import AlphaHandle, AlphaSpec, RationalInterval, max_refinement_depth
from .errors import IndexBeyondSpec, InvalidPlan, PrecisionExhausted

_F0 = Fraction(0)
_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class OstrowskiDigits:
    """Finite digit map j -> b_j (nonzero entries only), with horizon and
    a rational bound on |beta - synthesized value| mod 1."""

    digits: tuple[tuple[int, int], ...]
    horizon: int
    tail_bound: Fraction

    def __post_init__(self):
        seen = set()
        for j, b in self.digits:
            if j < 0:
                raise InvalidPlan(f"digit index {j} < 0")
            if j in seen:
                raise InvalidPlan(f"duplicate digit index {j}")
            seen.add(j)
        if self.tail_bound < 0:
            raise InvalidPlan("tail bound must be nonnegative")

    @staticmethod
    def from_map(mapping: dict[int, int], horizon: Optional[int] = None,
                 tail_bound: Fraction = _F0) -> "OstrowskiDigits":
        items = tuple(sorted((j, b) for j, b in mapping.items() if b != 0))
        top = max([j for j, _ in items], default=0)
        return OstrowskiDigits(items, horizon if horizon is not None else top, tail_bound)

    def as_dict(self) -> dict[int, int]:
        return dict(self.digits)

    def digit(self, j: int) -> int:
        return self.as_dict().get(j, 0)

    def support(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.digits)


def synthesize(handle: AlphaHandle, digits: OstrowskiDigits) -> CirclePoint:
    """Exact lattice point sum_j b_j q_j alpha mod 1."""
    m = 0
    for j, b in digits.digits:
        _, qj = handle.convergent(j)
        m += b * qj
    return CirclePoint.lattice(_F0, m, handle)


class _Remainder:
    """Signed real remainder r + m*alpha (+- radius), kept centered in [-1/2, 1/2]."""

    def __init__(self, handle: AlphaHandle, r: Fraction, m: int, radius: Fraction):
        self.handle = handle
        self.r = r
        self.m = m
        self.radius = radius

    def interval(self, width: Fraction) -> RationalInterval:
        if self.m == 0:
            base = RationalInterval(self.r, self.r)
        else:
            base = self.handle.value_interval(self.m, self.r, width)
        if self.radius:
            base = RationalInterval(base.lo - self.radius, base.hi + self.radius)
        return base

    def is_exactly(self, r: Fraction, m: int) -> bool:
        return self.radius == 0 and self.m == m and self.r == r

    def subtract(self, r: Fraction, m: int):
        self.r -= r
        self.m -= m

    def recenter(self):
        # shift by an integer so the value lies in [-1/2, 1/2]
        width = Fraction(1, 2**24)
        for _ in range(max_refinement_depth()):
            iv = self.interval(width)
            k = math.floor(iv.mid + _HALF)
            shifted = iv.shift(-k)
            if -_HALF <= shifted.lo and shifted.hi <= _HALF:
                self.r -= k
                return
            if self.is_exactly(Fraction(k) + _HALF, 0) or self.is_exactly(Fraction(k) - _HALF, 0):
                self.r -= k
                return
            width /= 2**8
            if self.radius and width < self.radius / 2**10:
                self.r -= k  # centered up to the error radius; good enough
                return
        raise IndexBeyondSpec("remainder recentering exceeded the depth cap")

    def lift_unit(self):
        # shift by an integer so the value lies in [0, 1) (start-of-expansion lift)
        if self.radius == 0 and self.m == 0 and self.r.denominator == 1:
            self.r = _F0
            return
        width = Fraction(1, 2**24)
        for _ in range(max_refinement_depth()):
            iv = self.interval(width)
            k = math.floor(iv.mid)
            shifted = iv.shift(-k)
            if 0 <= shifted.lo and shifted.hi < 1:
                self.r -= k
                return
            width /= 2**8
            if self.radius and width < self.radius / 2**10:
                self.r -= k
                return
        raise IndexBeyondSpec("remainder lift exceeded the depth cap")


def expand(handle: AlphaHandle, beta: CirclePoint | Fraction, horizon: int) -> OstrowskiDigits:
    """Greedy canonical expansion of beta through digit index `horizon`.

    At step j the digit minimizes the remainder against theta_j = q_j alpha - p_j
    within the canonical range 0 <= b_j <= a_{j+1} (ties resolved to the
    smaller digit). The reported tail bound is the exact magnitude bound of
    the final remainder, so synthesize(expand(beta)) reproduces beta within it.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if not isinstance(beta, CirclePoint):
        beta = CirclePoint.rational(Fraction(beta))
    rem = _Remainder(handle, beta.r, beta.m, beta.radius)
    rem.lift_unit()
    digits: dict[int, int] = {}
    for j in range(horizon + 1):
        pj, qj = handle.convergent(j)
        a_next = handle.partial_quotient(j + 1)
        b = _greedy_digit(rem, -pj, qj, a_next)
        if b:
            digits[j] = b
            rem.subtract(Fraction(-pj) * b, qj * b)
        rem.recenter()
    tail = _abs_upper(rem)
    return OstrowskiDigits.from_map(digits, horizon=horizon, tail_bound=tail)


def _greedy_digit(rem: _Remainder, theta_r: int, theta_m: int, a_next: int) -> int:
    """Nearest integer to remainder/theta, clamped into [0, a_next]."""
    width = Fraction(1, 2**30)
    for _ in range(max_refinement_depth()):
        riv = rem.interval(width)
        tiv = rem.handle.value_interval(theta_m, Fraction(theta_r), width)
        if tiv.lo <= 0 <= tiv.hi:
            width /= 2**8
            continue
        candidates = _ratio_interval(riv, tiv)
        k_lo = math.floor(candidates.lo + _HALF)
        k_hi = math.floor(candidates.hi + _HALF)
        if k_lo == k_hi:
            return min(max(k_lo, 0), a_next)
        # maybe an exact tie: remainder/theta == k + 1/2 with k = min(k_lo, k_hi)
        k = min(k_lo, k_hi)
        if rem.radius == 0:
            tie_r = 2 * rem.r - (2 * k + 1) * Fraction(theta_r)
            tie_m = 2 * rem.m - (2 * k + 1) * theta_m
            if tie_r == 0 and tie_m == 0:
                return min(max(k, 0), a_next)  # half-way: take the smaller digit
        width /= 2**8
        if rem.radius and width < rem.radius / 2**12:
            raise PrecisionExhausted("ostrowski digit",
                                     "digit choice undecidable within beta's error radius")
    raise IndexBeyondSpec("digit refinement exceeded the depth cap")


def _ratio_interval(num: RationalInterval, den: RationalInterval) -> RationalInterval:
    corners = [num.lo / den.lo, num.lo / den.hi, num.hi / den.lo, num.hi / den.hi]
    return RationalInterval(min(corners), max(corners))


def _abs_upper(rem: _Remainder) -> Fraction:
    iv = rem.interval(Fraction(1, 2**40))
    return max(abs(iv.lo), abs(iv.hi))


@dataclass(frozen=True)
class HrDiagnostic:
    """Exact partial sums S_J = sum_{j<=J} |b_j|^r / a_{j+1}."""

    r: int
    partial_sums: tuple[Fraction, ...]
    horizon: int


def hr_partial_sums(digits: OstrowskiDigits, handle: AlphaHandle, r: int) -> HrDiagnostic:
    if r < 1:
        raise ValueError("exponent r must be a positive integer")
    table = digits.as_dict()
    sums = []
    total = _F0
    for j in range(digits.horizon + 1):
        b = table.get(j, 0)
        if b:
            total += Fraction(abs(b) ** r, handle.partial_quotient(j + 1))
        sums.append(total)
    return HrDiagnostic(r=r, partial_sums=tuple(sums), horizon=digits.horizon)


@dataclass(frozen=True)
class SpecialBetaPlan:
    """Digit plan b_{j_{n+1}} = d_n b_{j_n} + b_{j_{n-1}} on a sparse index set.

    Carries the two convergence diagnostics as exact partial sums:
    sum_n b_{j_n} / a_{j_n + 1} and sum_n (b_{j_n} / b_{j_{n+1}})^2.
    """

    positions: tuple[int, ...]          # digit indices j_n
    d_values: tuple[int, ...]           # multipliers d_1 .. d_{n_max-1}
    b_values: tuple[int, ...]           # digit values b_{j_0} .. b_{j_{n_max}}
    alpha_spec: AlphaSpec
    growth_sums: tuple[Fraction, ...]   # partials of sum b_{j_n}/a_{j_n+1}
    ratio_sums: tuple[Fraction, ...]    # partials of sum (b_{j_n}/b_{j_{n+1}})^2

    @property
    def n_max(self) -> int:
        return len(self.positions) - 1

    def digits(self, n_cut: Optional[int] = None) -> OstrowskiDigits:
        """Truncate the plan at term n_cut (inclusive) into a digit map.

        The tail bound follows the geometric-comparison shape
        (C1 + 1) * b_{first dropped} / q_{its index + 1}; with nothing
        dropped the representation is exact (tail 0).
        """
        n_cut = self.n_max if n_cut is None else n_cut
        if not 0 <= n_cut <= self.n_max:
            raise InvalidPlan(f"truncation {n_cut} outside plan range 0..{self.n_max}")
        mapping = {self.positions[i]: self.b_values[i] for i in range(n_cut + 1)}
        if n_cut == self.n_max:
            tail = _F0
        else:
            handle = AlphaHandle(self.alpha_spec)
            m = self.positions[n_cut + 1]
            _, q_next = handle.convergent(m + 1)
            c1 = self.c1_upper_bound()
            tail = (c1 + 1) * Fraction(self.b_values[n_cut + 1], q_next)
        return OstrowskiDigits.from_map(mapping, horizon=self.positions[n_cut], tail_bound=tail)

    def c1_upper_bound(self) -> Fraction:
        """Upper bound for the full digit-growth series sum b/a.

        Computed terms must at least halve; the unseen tail is then bounded
        by the last computed term.
        """
        handle = AlphaHandle(self.alpha_spec)
        terms = []
        for i, pos in enumerate(self.positions):
            terms.append(Fraction(self.b_values[i], handle.partial_quotient(pos + 1)))
        for a, b in zip(terms, terms[1:]):
            if a > 0 and b > a / 2:
                raise InvalidPlan("digit-growth terms do not halve; no honest tail bound")
        return sum(terms, _F0) + (terms[-1] if terms else _F0)


def construct_special_beta(handle: AlphaHandle, d_rule: str | Callable[[int], int],
                           n_max: int) -> SpecialBetaPlan:
    """Build the sparse digit plan over a sparse-rule alpha.

    Digit positions are one below the prescribed quotient indices, so each
    digit b_{j_n} sits right before its huge companion quotient a_{j_n + 1}.
    Convention: b_{j_0} = b_{j_1} = 1, then the two-term recurrence with
    multipliers d_n for n >= 1.
    """
    spec = handle.spec
    if spec.kind != "sparse":
        raise InvalidPlan("special-beta construction needs a sparse-rule alpha spec")
    if n_max < 1:
        raise InvalidPlan("n_max must be >= 1")
    d_fn = parse_int_expr(d_rule) if isinstance(d_rule, str) else d_rule
    indices = spec.sparse_indices(n_max + 2)
    positions = tuple(j - 1 for j in indices[: n_max + 1])
    if any(p < 0 for p in positions):
        raise InvalidPlan("sparse indices must be >= 1 so digit positions are >= 0")
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise InvalidPlan("digit positions must be strictly increasing")
    b = [1, 1]
    d_values = []
    for n in range(1, n_max):
        d = d_fn(n)
        if d < 1:
            raise InvalidPlan(f"multiplier d_{n} = {d} must be >= 1")
        d_values.append(d)
        b.append(d * b[-1] + b[-2])
    b = b[: n_max + 1]
    growth, ratios = [], []
    tot_g, tot_r = _F0, _F0
    for i, pos in enumerate(positions):
        tot_g += Fraction(b[i], handle.partial_quotient(pos + 1))
        growth.append(tot_g)
        if i + 1 <= n_max and i + 1 < len(b):
            tot_r += Fraction(b[i], b[i + 1]) ** 2
        ratios.append(tot_r)
    return SpecialBetaPlan(
        positions=positions,
        d_values=tuple(d_values),
        b_values=tuple(b),
        alpha_spec=spec,
        growth_sums=tuple(growth),
        ratio_sums=tuple(ratios),
    )


@dataclass(frozen=True)
class GPConditionReport:
    """Partial data for the multiplicative-equation solvability conditions:
    enclosed partial sums of sum ||b_n s||^2 and the t-value lattice points
    t_J = -(sum_{n<=J} [b_n s] q_n) alpha mod 1 (the k alpha offset taken 0)."""

    s: Fraction
    s_radius: Fraction
    sum_sq: tuple[RationalInterval, ...]
    t_points: tuple[CirclePoint, ...]
    horizon: int


def gp_condition_check(digits: OstrowskiDigits, handle: AlphaHandle, s: Fraction,
                       horizon: Optional[int] = None,
                       s_radius: Fraction = _F0) -> GPConditionReport:
    if horizon is None:
        horizon = digits.horizon
    s = Fraction(s)
    table = digits.as_dict()
    sums: list[RationalInterval] = []
    t_points: list[CirclePoint] = []
    total = RationalInterval(_F0, _F0)
    m_acc = 0
    for n in range(horizon + 1):
        b = table.get(n, 0)
        if b:
            x_lo = b * s - abs(b) * s_radius
            x_hi = b * s + abs(b) * s_radius
            k_lo, k_hi = math.floor(x_lo), math.floor(x_hi)
            if k_lo != k_hi:
                raise PrecisionExhausted(
                    f"integral part of b_{n} * s",
                    "the enclosure of b*s straddles an integer")
            norm_iv = _norm_of_rational_interval(x_lo, x_hi)
            sq = RationalInterval(norm_iv.lo**2, norm_iv.hi**2)
            total = RationalInterval(total.lo + sq.lo, total.hi + sq.hi)
            _, qn = handle.convergent(n)
            m_acc -= k_lo * qn
        sums.append(total)
        t_points.append(CirclePoint.lattice(_F0, m_acc, handle))
    return GPConditionReport(s=s, s_radius=s_radius, sum_sq=tuple(sums),
                             t_points=tuple(t_points), horizon=horizon)


def _norm_of_rational_interval(lo: Fraction, hi: Fraction) -> RationalInterval:
    """Enclosure of ||x|| for x in [lo, hi] (rational endpoints)."""
    if hi - lo >= 1:
        return RationalInterval(_F0, _HALF)
    k = math.floor((lo + hi) / 2 + _HALF)
    a, b = lo - k, hi - k
    vals = [abs(a), abs(b)]
    out_lo = _F0 if a <= 0 <= b else min(vals)
    out_hi = max(vals)
    if out_hi > _HALF:
        out_hi = _HALF  # wrapped past the half-way point
        out_lo = min(out_lo, _HALF)
    return RationalInterval(out_lo, out_hi)
