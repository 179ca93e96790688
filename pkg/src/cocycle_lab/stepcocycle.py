"""Step functions over the circle and their Birkhoff sums, all exact.

Interval convention: every indicator is half-open [a, b) — left endpoint in,
right endpoint out. This differs from the closed-interval reading on a
measure-zero set and makes evaluation total on lattice orbits; exact
breakpoint hits are logged so the discrepancy set is auditable.

Piece values are stored symbolically as integer pairs (u, v) meaning
u + v*beta, so Birkhoff sums of the two-piece cocycle come out as exact
(count, -n) pairs with no rounding anywhere.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .circle import CirclePoint
from .contfrac import AlphaHandle, RationalInterval
from .counting import StepEvaluator, count_visits_fast
from .errors import DegenerateParameter, IndexBeyondSpec

Pair = tuple[Fraction, Fraction]

_F0 = Fraction(0)
_ZERO_PAIR: Pair = (_F0, _F0)


def _pair(u, v) -> Pair:
    return (Fraction(u), Fraction(v))


def pair_add(a: Pair, b: Pair) -> Pair:
    return (a[0] + b[0], a[1] + b[1])

def pair_scale(a: Pair, c) -> Pair:
    return (a[0] * c, a[1] * c)


@dataclass(frozen=True)
class IndicatorPart:
    """One term coef * 1_{[0, beta)}(x + shift) of a step cocycle."""

    coef: int
    beta: CirclePoint
    shift: CirclePoint


@dataclass(frozen=True)
class StepCocycle:
    """Exact step function: sorted breakpoints, per-arc (u, v) values.

    Arc i runs from breakpoints[i] (inclusive) to the next breakpoint
    (exclusive), wrapping at the end. `indicator_parts` plus `const_pair`
    give the same function as a combination of interval indicators, which
    is what the logarithmic-time Birkhoff path consumes.
    """

    breakpoints: tuple[CirclePoint, ...]
    values: tuple[tuple[int, int], ...]
    beta_param: Optional[CirclePoint]
    kind: str
    variation: Fraction
    integral_pair: Pair
    indicator_parts: Optional[tuple[IndicatorPart, ...]] = None
    const_pair: Pair = _ZERO_PAIR
    shadow_tail: Fraction = _F0

    def value_interval(self, pair: Pair, target_width: Fraction) -> RationalInterval:
        """Enclosure of the real number u + v*{beta} for a (u, v) pair."""
        u, v = Fraction(pair[0]), Fraction(pair[1])
        if v == 0:
            return RationalInterval(u, u)
        if self.beta_param is None:
            raise ValueError("beta-dependent value with no beta parameter")
        biv = self.beta_param.frac_interval(target_width / abs(v))
        scaled = biv.scale(v)
        return RationalInterval(u + scaled.lo, u + scaled.hi)


def _sort_points(points: Sequence[CirclePoint]) -> list[CirclePoint]:
    return sorted(points, key=functools.cmp_to_key(lambda a, b: a.compare_frac(b)))


def _dedupe(points: Sequence[CirclePoint]) -> list[CirclePoint]:
    out: list[CirclePoint] = []
    for p in points:
        if not any(p.same_point(q) for q in out):
            out.append(p)
    return out


def _variation(values: Sequence[tuple[int, int]]) -> Fraction:
    total = Fraction(0)
    K = len(values)
    for i in range(K):
        u0, v0 = values[i - 1]
        u1, v1 = values[i]
        if v1 != v0:
            raise ValueError("jumps with a beta-dependent size are not supported")
        total += abs(u1 - u0)
    return total


def _require_interior(point: CirclePoint, name: str):
    if point.is_zero():
        raise DegenerateParameter(f"{name} must lie strictly inside (0, 1) mod 1")


def make_phi_beta(beta: CirclePoint) -> StepCocycle:
    """Two-piece cocycle: 1_{[0,beta)} - beta, value 1-beta then -beta."""
    _require_interior(beta, "beta")
    zero = CirclePoint.rational(0)
    return StepCocycle(
        breakpoints=(zero, beta),
        values=((1, -1), (0, -1)),
        beta_param=beta,
        kind="phi_beta",
        variation=Fraction(2),
        integral_pair=_ZERO_PAIR,
        indicator_parts=(IndicatorPart(1, beta, zero),),
        const_pair=_pair(0, -1),
    )


def make_phi_beta_gamma(beta: CirclePoint, gamma: CirclePoint) -> StepCocycle:
    """1_{[0,beta)}(x) - 1_{[0,beta)}(x + gamma); integer values in {-1,0,1}."""
    _require_interior(beta, "beta")
    _require_interior(gamma, "gamma")
    zero = CirclePoint.rational(0)
    candidates = [zero, beta, -gamma, beta - gamma]
    bps = _sort_points(_dedupe(candidates))
    values = []
    for s in bps:
        u = (1 if s.in_arc(zero, beta) else 0) - (1 if (s + gamma).in_arc(zero, beta) else 0)
        values.append((u, 0))
    return StepCocycle(
        breakpoints=tuple(bps),
        values=tuple(values),
        beta_param=beta,
        kind="phi_beta_gamma",
        variation=_variation(values),
        integral_pair=_ZERO_PAIR,
        indicator_parts=(IndicatorPart(1, beta, zero), IndicatorPart(-1, beta, gamma)),
    )


def indicator(beta: CirclePoint) -> StepCocycle:
    """Plain 1_{[0, beta)} (helper mode; integral is beta itself)."""
    _require_interior(beta, "beta")
    zero = CirclePoint.rational(0)
    return StepCocycle(
        breakpoints=(zero, beta),
        values=((1, 0), (0, 0)),
        beta_param=beta,
        kind="indicator",
        variation=Fraction(2),
        integral_pair=_pair(0, 1),
        indicator_parts=(IndicatorPart(1, beta, zero),),
    )


def zero_cocycle() -> StepCocycle:
    zero = CirclePoint.rational(0)
    return StepCocycle(
        breakpoints=(zero,),
        values=((0, 0),),
        beta_param=None,
        kind="zero",
        variation=Fraction(0),
        integral_pair=_ZERO_PAIR,
        indicator_parts=(),
    )


def stacked_indicator_cocycle(beta: CirclePoint, a: int) -> StepCocycle:
    """a * 1_{[0,beta)} - 1_{[0, a*beta)} with a a positive integer.

    Requires a*{beta} < 1 so the function has integral exactly 0 (otherwise
    the wrapped arc [0, {a beta}) loses an integer off the mean).
    """
    if a < 1:
        raise DegenerateParameter("a must be a positive integer")
    if a == 1:
        return zero_cocycle()
    _require_interior(beta, "beta")
    abeta = beta.scaled(a)
    one = CirclePoint.rational(1)
    # a*{beta} < 1  <=>  {a*beta} == a*{beta}, checked via the unreduced sum
    width = Fraction(1, 2**30)
    total = beta.frac_interval(width).scale(a)
    while not (total.hi < 1 or total.lo > 1):
        width /= 2**10
        if width < Fraction(1, 2**300):
            raise IndexBeyondSpec("cannot separate a*beta from 1")
        total = beta.frac_interval(width).scale(a)
    if total.lo > 1:
        raise DegenerateParameter("a * beta exceeds 1; the stacked cocycle would not be mean-zero")
    zero = CirclePoint.rational(0)
    return combine_steps([(a, indicator(beta), zero), (-1, indicator(abeta), zero)])


def combine_steps(parts: Sequence[tuple[int, StepCocycle, CirclePoint]]) -> StepCocycle:
    """Exact linear combination sum_k coef_k * f_k(x + shift_k)."""
    zero = CirclePoint.rational(0)
    candidates = [zero]
    for _, f, shift in parts:
        for bp in f.breakpoints:
            candidates.append(bp - shift)
    bps = _sort_points(_dedupe(candidates))
    values = []
    betas = [f.beta_param for _, f, _ in parts if f.beta_param is not None]
    beta_param = betas[0] if betas else None
    for b in betas[1:]:
        if not b.same_point(beta_param):
            # mixing two different beta symbols: only allowed if no piece value
            # actually uses v != 0 (checked below by integer-ness of values)
            beta_param = None
            break
    for s in bps:
        u, v = Fraction(0), Fraction(0)
        for coef, f, shift in parts:
            pu, pv = evaluate(f, s + shift)
            u += coef * pu
            v += coef * pv
        if v != 0 and beta_param is None:
            raise ValueError("cannot combine beta-dependent values over different betas")
        if u.denominator != 1 or v.denominator != 1:
            raise ValueError("combined piece values must stay integral pairs")
        values.append((int(u), int(v)))
    integral = _ZERO_PAIR
    const = _ZERO_PAIR
    ind_parts: list[IndicatorPart] = []
    for coef, f, shift in parts:
        integral = pair_add(integral, pair_scale(f.integral_pair, coef))
        const = pair_add(const, pair_scale(f.const_pair, coef))
        if f.indicator_parts is None:
            ind_parts = None  # type: ignore[assignment]
        elif ind_parts is not None:
            for p in f.indicator_parts:
                ind_parts.append(IndicatorPart(coef * p.coef, p.beta, p.shift + shift))
    return StepCocycle(
        breakpoints=tuple(bps),
        values=tuple(values),
        beta_param=beta_param,
        kind="custom",
        variation=_variation(values),
        integral_pair=integral,
        indicator_parts=tuple(ind_parts) if ind_parts is not None else None,
        const_pair=const,
    )


def evaluate(f: StepCocycle, x: CirclePoint) -> tuple[int, int]:
    """Value pair (u, v) of f at x under the half-open convention."""
    pos = 0
    for bp in f.breakpoints:
        if bp.compare_frac(x) <= 0:
            pos += 1
    arc = pos - 1 if pos >= 1 else len(f.breakpoints) - 1
    return f.values[arc]


@dataclass(frozen=True)
class BirkhoffResult:
    n: int
    value: Pair                       # exact (rational, beta-coefficient) pair
    method: str                       # "naive" | "fast"
    depth_used: int = 0
    exact_hits: tuple[int, ...] = ()

    @property
    def count(self) -> int:
        if self.value[1] != 0 or self.value[0].denominator != 1:
            raise ValueError("Birkhoff value is not a plain integer count")
        return int(self.value[0])


def birkhoff_naive(handle: AlphaHandle, f: StepCocycle, x: CirclePoint,
                   n: int) -> BirkhoffResult:
    """Direct orbit iteration; exact for lattice x (decimal x may raise)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return BirkhoffResult(0, _ZERO_PAIR, "naive")
    if x.radius != 0:
        u = Fraction(0)
        v = Fraction(0)
        for j in range(n):
            pu, pv = evaluate(f, CirclePoint(x.r, x.m + j, x.radius, x.alpha or handle))
            u += pu
            v += pv
        return BirkhoffResult(n, (u, v), "naive")
    ev = StepEvaluator(handle, f, x)
    K = len(f.breakpoints)
    counts = np.zeros(K, dtype=object)
    for _, idx in ev.piece_indices(n):
        got = np.bincount(idx, minlength=K)
        counts += got
    u = sum(Fraction(int(c)) * uv[0] for c, uv in zip(counts, f.values))
    v = sum(Fraction(int(c)) * uv[1] for c, uv in zip(counts, f.values))
    return BirkhoffResult(n, (Fraction(u), Fraction(v)), "naive",
                          exact_hits=tuple(ev.exact_hits))


def birkhoff_fast_indicator(handle: AlphaHandle, beta: CirclePoint, x: CirclePoint,
                            n: int) -> BirkhoffResult:
    """Exact visit count of [0, beta) in polylogarithmic time."""
    count, depth = count_visits_fast(handle, beta, x, n)
    return BirkhoffResult(n, _pair(count, 0), "fast", depth_used=depth)


def birkhoff_exact(handle: AlphaHandle, f: StepCocycle, x: CirclePoint, n: int,
                   prefer_fast: bool = True) -> BirkhoffResult:
    """Exact Birkhoff sum, using the indicator decomposition when available."""
    if prefer_fast and f.indicator_parts is not None and x.radius == 0:
        u, v = pair_scale(f.const_pair, n)
        depth = 0
        for part in f.indicator_parts:
            c, d = count_visits_fast(handle, part.beta, x + part.shift, n)
            u += part.coef * c
            depth = max(depth, d)
        return BirkhoffResult(n, (u, v), "fast", depth_used=depth)
    return birkhoff_naive(handle, f, x, n)


@dataclass(frozen=True)
class DenjoyKoksmaReport:
    n_index: int
    q: int
    sum_pair: Pair
    bound: Fraction
    abs_sum: RationalInterval
    ok: bool


def denjoy_koksma_check(handle: AlphaHandle, f: StepCocycle, x: CirclePoint,
                        n_index: int) -> DenjoyKoksmaReport:
    """|S_{q_n} f(x) - q_n mu(f)| <= V(f), evaluated exactly along q_n."""
    _, q = handle.convergent(n_index)
    res = birkhoff_exact(handle, f, x, q)
    dev = pair_add(res.value, pair_scale(f.integral_pair, -q))
    bound = f.variation
    iv = _abs_pair_interval(f, dev)
    width = Fraction(1, 2**40)
    while not (iv.hi <= bound or iv.lo > bound):
        width /= 2**10
        if width < Fraction(1, 2**400):
            raise IndexBeyondSpec("cannot separate |S_q - q mu| from V(f)")
        iv = _abs_pair_interval(f, dev, width)
    return DenjoyKoksmaReport(n_index=n_index, q=q, sum_pair=dev, bound=bound,
                              abs_sum=iv, ok=iv.hi <= bound)


def _abs_pair_interval(f: StepCocycle, pair: Pair,
                       target_width: Fraction = Fraction(1, 2**40)) -> RationalInterval:
    iv = f.value_interval(pair, target_width)
    lo, hi = abs(iv.lo), abs(iv.hi)
    if iv.lo <= 0 <= iv.hi:
        return RationalInterval(Fraction(0), max(lo, hi))
    return RationalInterval(min(lo, hi), max(lo, hi))
