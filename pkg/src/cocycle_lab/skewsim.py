"""Skew-product simulation on circle x fiber, compact quotients, and probes.

The fiber bookkeeping is exact: along a lattice orbit every step value is a
certified integer pair, so y after n steps equals the exact Birkhoff sum.
Long runs stream through the vectorized orbit engine in blocks; histogram
counts, returns to zero and excursion records are exact integers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .circle import CirclePoint
from .contfrac import AlphaHandle, RationalInterval, max_refinement_depth
from .counting import StepEvaluator, orbit_blocks, flag_near
from .errors import IndexBeyondSpec, ShadowingGuard
from .stepcocycle import (
    BirkhoffResult,
    Pair,
    StepCocycle,
    birkhoff_exact,
    make_phi_beta_gamma,
    pair_add,
)

_F0 = Fraction(0)


@dataclass(frozen=True)
class SkewState:
    x: CirclePoint
    y: Pair = (_F0, _F0)


def cocycle_from_plan(handle: AlphaHandle, digits, gamma: CirclePoint) -> StepCocycle:
    """phi_{beta,gamma} for a truncated digit plan, carrying its shadow tail."""
    from .ostrowski import synthesize
    beta = synthesize(handle, digits)
    f = make_phi_beta_gamma(beta, gamma)
    return replace(f, shadow_tail=Fraction(digits.tail_bound))


def min_breakpoint_gap(cocycle: StepCocycle) -> Fraction:
    """Positive lower bound on the smallest pairwise breakpoint distance."""
    bps = cocycle.breakpoints
    if len(bps) < 2:
        return Fraction(1)
    gap = Fraction(1)
    for i in range(len(bps)):
        for j in range(i + 1, len(bps)):
            width = Fraction(1, 2**30)
            iv = (bps[i] - bps[j]).norm_interval(width)
            while iv.lo == 0:
                width /= 2**10
                if width < Fraction(1, 2**600):
                    raise IndexBeyondSpec("breakpoints too close to separate")
                iv = (bps[i] - bps[j]).norm_interval(width)
            gap = min(gap, iv.lo)
    return gap


def _shadow_guard(cocycle: StepCocycle, n: int):
    if cocycle.shadow_tail and n * cocycle.shadow_tail >= min_breakpoint_gap(cocycle):
        raise ShadowingGuard(
            f"n = {n} exceeds the shadowing horizon: n * tail_bound "
            f">= smallest breakpoint gap")


def iterate(handle: AlphaHandle, cocycle: StepCocycle, state: SkewState,
            n: int) -> SkewState:
    """T^n on circle x fiber: exact final state, consistent with the
    Birkhoff sum of the cocycle at the base point."""
    if n < 0:
        raise ValueError("n must be >= 0")
    _shadow_guard(cocycle, n)
    res = birkhoff_exact(handle, cocycle, state.x, n)
    x_n = CirclePoint(state.x.r, state.x.m + n, state.x.radius, state.x.alpha or handle)
    return SkewState(x=x_n, y=pair_add(state.y, res.value))


def fiber_blocks(handle: AlphaHandle, cocycle: StepCocycle, x0: CirclePoint,
                 n: int, block: int = 1 << 17):
    """Stream (orbit_block, y_u, y_v) with y_* the cumulative fiber values
    after steps j0+1 .. j0+len (exact int64 cumulative sums)."""
    _shadow_guard(cocycle, n)
    ev = StepEvaluator(handle, cocycle, x0)
    u_table = np.array([uv[0] for uv in cocycle.values], dtype=np.int64)
    v_table = np.array([uv[1] for uv in cocycle.values], dtype=np.int64)
    v_used = bool(np.any(v_table))
    carry_u = np.int64(0)
    carry_v = np.int64(0)
    for ob, idx in _pieces_with_values(ev, n, block):
        y_u = np.cumsum(u_table[idx], dtype=np.int64) + carry_u
        y_v = np.cumsum(v_table[idx], dtype=np.int64) + carry_v if v_used else None
        yield ob, y_u, y_v
        carry_u = y_u[-1]
        if v_used:
            carry_v = y_v[-1]


def _pieces_with_values(ev: StepEvaluator, n: int, block: int):
    K = len(ev.bp_points)
    for ob in orbit_blocks(ev.handle, ev.x0, n, block):
        idx = np.searchsorted(ev.bp_floats, ob.values, side="right") - 1
        idx[idx < 0] = K - 1
        flags = flag_near(ob.values, ob.err, ev.bp_floats)
        if flags.any():
            for i in np.flatnonzero(flags):
                idx[i] = ev._exact_piece(ob.j0 + int(i))
        yield ob, idx


@dataclass(frozen=True)
class QuotientHistogram:
    modulus: int
    counts: tuple[int, ...]
    total: int
    tv_distance: float
    burn_in: int
    joint_depth: int
    joint_tv: float

    def __post_init__(self):
        if sum(self.counts) != self.total:
            raise ValueError("histogram counts must sum to the total")


def quotient_distribution(handle: AlphaHandle, beta: CirclePoint, gamma: CirclePoint,
                          a: int, n: int, x0: Optional[CirclePoint] = None,
                          burn_in: int = 1000, joint_depth: int = 3,
                          cocycle: Optional[StepCocycle] = None) -> QuotientHistogram:
    """Histogram of y_j mod a over j <= n (after burn-in), plus a joint
    (dyadic x-cell, residue) equidistribution statistic."""
    if a < 1:
        raise ValueError("modulus a must be >= 1")
    f = cocycle if cocycle is not None else make_phi_beta_gamma(beta, gamma)
    if any(v != 0 for _, v in f.values):
        raise ValueError("quotient histograms need an integer-valued cocycle")
    x0 = x0 if x0 is not None else CirclePoint.rational(0)
    counts = np.zeros(a, dtype=np.int64)
    cells = 1 << joint_depth
    joint = np.zeros((cells, a), dtype=np.int64)
    for ob, y_u, _ in fiber_blocks(handle, f, x0, n):
        j = np.arange(ob.j0 + 1, ob.j0 + 1 + len(y_u))
        keep = j > burn_in
        if not keep.any():
            continue
        res = np.mod(y_u[keep], a)
        counts += np.bincount(res, minlength=a)
        cell = np.minimum((ob.values[keep] * cells).astype(np.int64), cells - 1)
        np.add.at(joint, (cell, res), 1)
    total = int(counts.sum())
    tv = 0.5 * float(np.abs(counts / max(total, 1) - 1.0 / a).sum())
    joint_tv = 0.5 * float(np.abs(joint / max(total, 1) - 1.0 / (a * cells)).sum())
    return QuotientHistogram(modulus=a, counts=tuple(int(c) for c in counts),
                             total=total, tv_distance=tv, burn_in=burn_in,
                             joint_depth=joint_depth, joint_tv=joint_tv)


def quotient_family(handle: AlphaHandle, cocycle: StepCocycle, moduli: tuple[int, ...],
                    n: int, x0: Optional[CirclePoint] = None, burn_in: int = 1000,
                    ) -> dict[int, QuotientHistogram]:
    """One trajectory, histograms for several moduli (exact value counts)."""
    x0 = x0 if x0 is not None else CirclePoint.rational(0)
    value_counts: dict[int, int] = {}
    for ob, y_u, _ in fiber_blocks(handle, cocycle, x0, n):
        j = np.arange(ob.j0 + 1, ob.j0 + 1 + len(y_u))
        keep = j > burn_in
        if not keep.any():
            continue
        vals, cnts = np.unique(y_u[keep], return_counts=True)
        for v, c in zip(vals, cnts):
            value_counts[int(v)] = value_counts.get(int(v), 0) + int(c)
    total = sum(value_counts.values())
    out = {}
    for a in moduli:
        counts = [0] * a
        for v, c in value_counts.items():
            counts[v % a] += c
        tv = 0.5 * sum(abs(c / total - 1.0 / a) for c in counts)
        out[a] = QuotientHistogram(modulus=a, counts=tuple(counts), total=total,
                                   tv_distance=tv, burn_in=burn_in,
                                   joint_depth=0, joint_tv=float("nan"))
    return out


@dataclass(frozen=True)
class EssentialValueProbe:
    value: Pair
    depth: int
    n_max: int
    seed: int
    supported_cells: tuple[bool, ...]
    verdict: str                    # "supported" | "unsupported"
    witness_cells: int

    @property
    def supported(self) -> bool:
        return self.verdict == "supported"


def essential_value_probe(handle: AlphaHandle, cocycle: StepCocycle, value,
                          depth: int, n_max: int, seed: int,
                          x0: Optional[CirclePoint] = None) -> EssentialValueProbe:
    """One-sided empirical probe of the essential-value test set.

    Scans one seeded orbit for pairs of visits to each dyadic cell whose
    fiber difference equals the target exactly (integer cocycles; for
    beta-valued cocycles the (u, v) pair must match exactly). The verdict is
    "supported" iff every cell produced a witness at this resolution; it can
    only strengthen when n_max grows.
    """
    if depth < 1 or n_max < 1:
        raise ValueError("depth and n_max must be >= 1")
    target = value if isinstance(value, tuple) else (Fraction(value), _F0)
    target_u = int(target[0])
    target_v = int(target[1])
    if x0 is None:
        rng = random.Random(seed)
        x0 = CirclePoint.rational(Fraction(rng.getrandbits(64), 2**64))
    cells = 1 << depth
    v_needed = target_v != 0 or any(v != 0 for _, v in cocycle.values)
    seen: dict[tuple, int] = {}
    boundary = np.arange(1, cells) / cells
    for ob, y_u, y_v in fiber_blocks(handle, cocycle, x0, n_max):
        cell = np.minimum((ob.values * cells).astype(np.int64), cells - 1)
        flags = flag_near(ob.values, ob.err, boundary)
        for i in np.flatnonzero(flags):
            cell[i] = _exact_cell(handle, x0, ob.j0 + int(i), depth)
        if v_needed:
            keys = zip(cell.tolist(), y_u.tolist(), y_v.tolist())
        else:
            keys = zip(cell.tolist(), y_u.tolist())
        for key in keys:
            seen[key] = min(seen.get(key, 0) + 1, 2)
    supported = []
    for c in range(cells):
        found = False
        for key, cnt in seen.items():
            if key[0] != c:
                continue
            if target_u == 0 and target_v == 0:
                if cnt >= 2:
                    found = True
                    break
            else:
                probe = (c, key[1] + target_u, key[2] + target_v) if v_needed \
                    else (c, key[1] + target_u)
                if probe in seen:
                    found = True
                    break
        supported.append(found)
    verdict = "supported" if all(supported) else "unsupported"
    return EssentialValueProbe(value=(Fraction(target_u), Fraction(target_v)),
                               depth=depth, n_max=n_max, seed=seed,
                               supported_cells=tuple(supported), verdict=verdict,
                               witness_cells=sum(supported))


def _exact_cell(handle: AlphaHandle, x0: CirclePoint, j: int, depth: int) -> int:
    pt = CirclePoint(x0.r, x0.m + j, x0.radius, x0.alpha or handle)
    cells = 1 << depth
    for c in range(cells):
        lo = CirclePoint.rational(Fraction(c, cells))
        hi = CirclePoint.rational(Fraction(c + 1, cells))
        if pt.in_arc(lo, hi):
            return c
    raise AssertionError("point escaped the dyadic partition")


@dataclass(frozen=True)
class RecurrenceReport:
    n_max: int
    max_excursion: float
    returns_to_zero: int
    checkpoints: tuple[tuple[int, int, str, bool], ...]  # (k, q_k, value, dk_ok)
    dk_bound: Fraction
    exact_hits: int


def recurrence_diagnostic(handle: AlphaHandle, cocycle: StepCocycle,
                          x0: CirclePoint, n_max: int) -> RecurrenceReport:
    """Excursion and return statistics, with the variation bound checked
    exactly along every convergent denominator q_k <= n_max."""
    beta_f = cocycle.beta_param.float_mod1() if cocycle.beta_param is not None else 0.0
    max_exc = 0.0
    returns = 0
    hits = 0
    v_any = any(v != 0 for _, v in cocycle.values)
    for ob, y_u, y_v in fiber_blocks(handle, cocycle, x0, n_max):
        if v_any:
            y_real = y_u.astype(np.float64) + y_v.astype(np.float64) * beta_f
            zero = (y_u == 0) & (y_v == 0)
        else:
            y_real = y_u.astype(np.float64)
            zero = y_u == 0
        max_exc = max(max_exc, float(np.max(np.abs(y_real))))
        returns += int(zero.sum())
    checkpoints = []
    k = 1
    while True:
        _, qk = handle.convergent(k)
        if qk > n_max:
            break
        if k >= 1 and qk <= n_max:
            rep = denjoy_value(handle, cocycle, x0, k)
            checkpoints.append(rep)
        k += 1
    return RecurrenceReport(n_max=n_max, max_excursion=max_exc, returns_to_zero=returns,
                            checkpoints=tuple(checkpoints), dk_bound=cocycle.variation,
                            exact_hits=hits)


def denjoy_value(handle: AlphaHandle, cocycle: StepCocycle, x0: CirclePoint,
                 k: int) -> tuple[int, int, str, bool]:
    from .stepcocycle import denjoy_koksma_check
    rep = denjoy_koksma_check(handle, cocycle, x0, k)
    u, v = rep.sum_pair
    label = f"{u}" if v == 0 else f"{u}{v:+}b"
    return (k, rep.q, label, rep.ok)


@dataclass(frozen=True)
class CommutationReport:
    gamma: str
    epsilon: int
    residual_sup: float
    residual_l2: float
    grid: int
    exact_zero: bool


def verify_commutation_exact(handle: AlphaHandle, phi: StepCocycle,
                             gamma: CirclePoint, psi: StepCocycle,
                             epsilon: int) -> CommutationReport:
    """Residual of eps*phi - T_gamma phi - (psi - T_alpha psi) as an exact
    step function; sup over its finitely many pieces."""
    from .stepcocycle import combine_steps
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    zero = CirclePoint.rational(0)
    alpha_pt = CirclePoint.lattice(_F0, 1, handle)
    resid = combine_steps([
        (epsilon, phi, zero),
        (-1, phi, gamma),
        (-1, psi, zero),
        (1, psi, alpha_pt),
    ])
    exact_zero = all(_pair_exactly_zero(resid, pair) for pair in resid.values)
    sup = 0.0
    for pair in resid.values:
        iv = resid.value_interval((Fraction(pair[0]), Fraction(pair[1])), Fraction(1, 2**40))
        sup = max(sup, abs(float(iv.lo)), abs(float(iv.hi)))
    return CommutationReport(gamma=repr(gamma), epsilon=epsilon, residual_sup=sup,
                             residual_l2=sup, grid=0, exact_zero=exact_zero)


def _pair_exactly_zero(f: StepCocycle, pair: tuple[int, int]) -> bool:
    """Whether u + v*{beta} is exactly zero (rational beta folds in)."""
    import math
    u, v = pair
    if v == 0:
        return u == 0
    b = f.beta_param
    if b is not None and b.radius == 0 and b.m == 0:
        frac = b.r - math.floor(b.r)
        return u + v * frac == 0
    return False  # irrational beta: u + v*beta = 0 forces u = v = 0


def verify_commutation_grid(handle: AlphaHandle, phi: StepCocycle,
                            gamma: CirclePoint, grids: dict,
                            epsilon: int) -> CommutationReport:
    """Grid residual of eps*phi - T_gamma phi against a truncated transfer
    solution (grids as returned by coboundary.solve_transfer)."""
    x = grids["x"]
    gfl = gamma.float_mod1()
    phi_x = _step_floats(phi, x)
    phi_xg = _step_floats(phi, (x + gfl) % 1.0)
    resid = epsilon * phi_x - phi_xg - (grids["psi"] - grids["psi_alpha"])
    ok = grids["included"]
    sup = float(np.max(np.abs(resid[ok])))
    l2 = float(np.sqrt(np.mean(resid[ok] ** 2)))
    return CommutationReport(gamma=repr(gamma), epsilon=epsilon, residual_sup=sup,
                             residual_l2=l2, grid=len(x), exact_zero=False)


def _step_floats(f: StepCocycle, x: np.ndarray) -> np.ndarray:
    bp = np.array([p.float_mod1() for p in f.breakpoints])
    beta_f = f.beta_param.float_mod1() if f.beta_param is not None else 0.0
    vals = np.array([u + v * beta_f for u, v in f.values])
    idx = np.searchsorted(bp, x % 1.0, side="right") - 1
    idx[idx < 0] = len(bp) - 1
    return vals[idx]


def prop32_diagnostic(handle: AlphaHandle, beta: CirclePoint, a: int,
                      n_max: int, x0: Optional[CirclePoint] = None) -> dict:
    """Recurrence diagnostics for the stacked cocycle a 1_{[0,b)} - 1_{[0,ab)}."""
    from .stepcocycle import stacked_indicator_cocycle
    f = stacked_indicator_cocycle(beta, a)
    x0 = x0 if x0 is not None else CirclePoint.rational(0)
    if f.kind == "zero":
        return {"cocycle": "zero", "variation": 0, "max_excursion": 0.0,
                "returns_to_zero": n_max, "checkpoints": (), "all_dk_ok": True,
                "integral_pair": (0, 0)}
    rep = recurrence_diagnostic(handle, f, x0, n_max)
    return {
        "cocycle": f"stacked a={a}",
        "variation": str(f.variation),
        "integral_pair": (str(f.integral_pair[0]), str(f.integral_pair[1])),
        "max_excursion": rep.max_excursion,
        "returns_to_zero": rep.returns_to_zero,
        "checkpoints": rep.checkpoints,
        "all_dk_ok": all(c[3] for c in rep.checkpoints),
    }


def seeded_gammas(seed: int, count: int) -> list[CirclePoint]:
    """Reproducible gamma draws: rationals k/2^64 (documented sampling of the
    almost-every-gamma statements)."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        k = rng.getrandbits(64)
        if k:
            out.append(CirclePoint.rational(Fraction(k, 2**64)))
    return out
