"""Exact orbit counting for irrational rotations.

Two independent routes to #{0 <= j < n : {x + j*alpha} in [0, beta)}:

* a direct per-step walk (`count_visits_reference`, the test oracle, and a
  faster certified variant used by the naive Birkhoff path), and
* a polylogarithmic path (`count_visits_fast`) that rewrites the indicator
  as a difference of floors, 1_{[0,B)}({t}) = floor(t) - floor(t - B), and
  evaluates both floor sums with the classic Euclidean-style algorithm at
  the two rational endpoints of an alpha enclosure. When the lower- and
  upper-endpoint sums agree, every floor is pinned and the count is exact.

Also home to the vectorized orbit engine used by the simulation module:
float64 blocks of {x0 + j*alpha} with a certified error bound and exact
fallback near flagged values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circle import CirclePoint
from .contfrac import AlphaHandle
from .errors import IndexBeyondSpec

_DEPTH_SCHEDULE = (6, 10, 16, 24, 36, 54, 80, 120, 160, 200)


def floor_sum(n: int, m: int, a: int, b: int) -> int:
    """sum_{i=0}^{n-1} floor((a*i + b) / m) for integers, m >= 1, n >= 0."""
    if n <= 0:
        return 0
    ans = 0
    if a < 0:
        a2 = a % m
        ans -= n * (n - 1) // 2 * ((a2 - a) // m)
        a = a2
    if b < 0:
        b2 = b % m
        ans -= n * ((b2 - b) // m)
        b = b2
    while True:
        if a >= m:
            ans += n * (n - 1) // 2 * (a // m)
            a %= m
        if b >= m:
            ans += n * (b // m)
            b %= m
        y_max = a * n + b
        if y_max < m:
            return ans
        n = y_max // m
        b = y_max % m
        m, a = a, m


def _floor_sum_rational(n: int, start_c: int, num: int, den: int, r: Fraction) -> int:
    """sum_{j=0}^{n-1} floor(r + (start_c + j) * num/den) exactly."""
    a, d = r.numerator, r.denominator
    # floor((a*den + d*num*(start_c + j)) / (d*den))
    return floor_sum(n, d * den, d * num, a * den + d * num * start_c)


def _orbit_floor_bounds(n: int, m0: int, r: Fraction,
                        lo: Fraction, hi: Fraction) -> tuple[int, int]:
    """Bounds for F = sum_{j<n} floor(r + (m0+j)*alpha) with alpha in [lo, hi].

    Each floor is monotone in alpha with the sign of its coefficient, so the
    j-range splits at the sign change of m0 + j.
    """
    split = min(max(-m0, 0), n)  # j < split has negative coefficient

    def side(alpha_neg: Fraction, alpha_pos: Fraction) -> int:
        total = 0
        if split > 0:
            total += _floor_sum_rational(split, m0, alpha_neg.numerator,
                                         alpha_neg.denominator, r)
        if split < n:
            total += _floor_sum_rational(n - split, m0 + split, alpha_pos.numerator,
                                         alpha_pos.denominator, r)
        return total

    return side(hi, lo), side(lo, hi)


def _beta_reduction(beta: CirclePoint) -> tuple[Fraction, int]:
    """(r, m) with {beta} = r + m*alpha exactly and the value in (0, 1)."""
    if beta.radius != 0:
        raise ValueError("fast counting needs an exact (lattice) beta")
    if beta.m == 0:
        b = beta.r - math.floor(beta.r)
        return b, 0
    iv = beta.alpha.value_interval(beta.m, beta.r, Fraction(1, 2**30))
    k = math.floor(iv.mid)
    if not (math.floor(iv.lo) == math.floor(iv.hi) == k):
        iv = beta.alpha.value_interval(beta.m, beta.r, Fraction(1, 2**80))
        k = math.floor(iv.lo)
        if math.floor(iv.hi) != k:
            raise IndexBeyondSpec("cannot resolve the integer part of beta")
    return beta.r - k, beta.m


def count_visits_fast(handle: AlphaHandle, beta: CirclePoint, x: CirclePoint,
                      n: int) -> tuple[int, int]:
    """Exact #{0 <= j < n : {x + j*alpha} in [0, beta)} in polylog time.

    Returns (count, depth_used). beta and x must be exact points.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0, 0
    if x.radius != 0:
        raise ValueError("fast counting needs an exact (lattice) x")
    rb, mb = _beta_reduction(beta)
    r1, m1 = x.r, x.m
    r2, m2 = x.r - rb, x.m - mb
    for depth in _depths(handle, n, x, beta):
        iv = handle.enclosure(depth)
        f1_lo, f1_hi = _orbit_floor_bounds(n, m1, r1, iv.lo, iv.hi)
        if f1_lo != f1_hi:
            continue
        f2_lo, f2_hi = _orbit_floor_bounds(n, m2, r2, iv.lo, iv.hi)
        if f2_lo != f2_hi:
            continue
        return f1_lo - f2_lo, depth
    raise IndexBeyondSpec(
        f"orbit count not certified within depth cap (n={n})"
    )


def _depths(handle: AlphaHandle, n: int, x: CirclePoint, beta: CirclePoint):
    """Depth schedule starting where the enclosure is plausibly fine enough."""
    den = x.r.denominator * beta.r.denominator
    scale = 4 * n * den * (abs(x.m) + abs(beta.m) + n)
    from .contfrac import max_refinement_depth
    cap = max_refinement_depth()
    start = 1
    while start < cap:
        _, q0 = handle.convergent(start)
        _, q1 = handle.convergent(start + 1)
        if q0 * q1 >= scale:
            break
        start += max(1, start // 2)
    emitted = False
    for d in (start,) + tuple(s for s in _DEPTH_SCHEDULE if s > start):
        if d <= cap:
            emitted = True
            yield d
    if not emitted or cap not in _DEPTH_SCHEDULE:
        yield cap


def count_visits_reference(handle: AlphaHandle, beta: CirclePoint, x: CirclePoint,
                           n: int) -> int:
    """Direct per-step oracle: exact arc membership point by point."""
    zero = CirclePoint.rational(0)
    count = 0
    for j in range(n):
        pt = CirclePoint(x.r, x.m + j, x.radius, x.alpha or handle)
        if pt.in_arc(zero, beta):
            count += 1
    return count


# -- certified vectorized orbit values ------------------------------------

_BLOCK = 1 << 17


@dataclass
class OrbitBlock:
    j0: int
    values: np.ndarray      # float64 circle values {x0 + j*alpha}
    err: float              # certified absolute error bound
    lattice_m0: int         # m of the first point (x0.m + j0)


def orbit_blocks(handle: AlphaHandle, x0: CirclePoint, n: int, block: int = _BLOCK):
    """Yield OrbitBlocks covering j = 0..n-1 with per-block exact anchors."""
    if x0.radius != 0:
        raise ValueError("orbit engine needs an exact starting point")
    af = handle.alpha_float()
    j0 = 0
    while j0 < n:
        length = min(block, n - j0)
        anchor_pt = CirclePoint(x0.r, x0.m + j0, Fraction(0), x0.alpha or handle)
        a0 = anchor_pt.float_mod1()
        v = (a0 + np.arange(length, dtype=np.float64) * af) % 1.0
        err = 1e-15 + length * 5e-16
        yield OrbitBlock(j0=j0, values=v, err=err, lattice_m0=x0.m + j0)
        j0 += length


def flag_near(values: np.ndarray, err: float, marks: np.ndarray) -> np.ndarray:
    """Boolean mask of entries within err+float-slack of any marked circle value."""
    margin = err + 1e-12
    dmin = np.full(values.shape, np.inf)
    for b in np.atleast_1d(marks):
        for shift in (-1.0, 0.0, 1.0):
            np.minimum(dmin, np.abs(values - (b + shift)), out=dmin)
    return dmin < margin


class StepEvaluator:
    """Evaluate a step function along an orbit in blocks.

    Float comparisons do the bulk of the work; any value within the error
    margin of a breakpoint is re-decided exactly through CirclePoint
    arithmetic, so the emitted piece indices are certified. Exact breakpoint
    hits are logged (half-open convention: the hit belongs to the arc that
    starts there).
    """

    def __init__(self, handle: AlphaHandle, cocycle, x0: CirclePoint):
        self.handle = handle
        self.cocycle = cocycle
        self.x0 = x0
        self.bp_points = list(cocycle.breakpoints)
        self.bp_floats = np.array([p.float_mod1() for p in self.bp_points])
        order = np.argsort(self.bp_floats)
        if not np.all(order == np.arange(len(order))):
            raise ValueError("cocycle breakpoints must be sorted by circle value")
        self.exact_hits: list[int] = []

    def piece_indices(self, n: int, block: int = _BLOCK):
        """Yield (j0, idx) with idx[i] the arc index of x0 + (j0+i)*alpha."""
        K = len(self.bp_points)
        for ob in orbit_blocks(self.handle, self.x0, n, block):
            idx = np.searchsorted(self.bp_floats, ob.values, side="right") - 1
            idx[idx < 0] = K - 1
            flags = flag_near(ob.values, ob.err, self.bp_floats)
            if flags.any():
                for i in np.flatnonzero(flags):
                    idx[i] = self._exact_piece(ob.j0 + int(i))
            yield ob.j0, idx

    def _exact_piece(self, j: int) -> int:
        pt = CirclePoint(self.x0.r, self.x0.m + j, Fraction(0), self.x0.alpha or self.handle)
        K = len(self.bp_points)
        if K == 1:
            if pt.same_point(self.bp_points[0]):
                self.exact_hits.append(j)
            return 0
        for i in range(K):
            if pt.same_point(self.bp_points[i]):
                self.exact_hits.append(j)
                return i
        for i in range(K):
            nxt = self.bp_points[(i + 1) % K]
            if pt.in_arc(self.bp_points[i], nxt):
                return i
        raise AssertionError("point escaped all arcs")  # unreachable: arcs cover the circle
