"""Fourier-side machinery for the linear coboundary equation over a rotation.

The transfer function of phi = psi - T_alpha psi has coefficients
psi_hat(n) = phi_hat(n) / (1 - e^{2 pi i n alpha}); everything here feeds on
exactly reduced phases: {n x} is produced by big-integer stepping against a
deep convergent of alpha, so a float64 term never inherits more than a few
ulps of reduction error even when x involves astronomically large lattice
multiples. Nonnegative-term series are accumulated in a fixed ascending
order with an explicit error-width accumulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .circle import CirclePoint
from .contfrac import AlphaHandle, RationalInterval, max_refinement_depth
from .errors import IndexBeyondSpec, PrecisionExhausted
from .ostrowski import OstrowskiDigits, synthesize

_F0 = Fraction(0)
_TWO_PI = 2.0 * math.pi

GRID_SHIFT = (math.sqrt(5.0) - 1.0) / 2.0  # irrational-like grid offset unit


# -- exactly reduced phase streams ----------------------------------------


@dataclass(frozen=True)
class PhaseStream:
    """Exact stepping state for {k * x}, k = 1..N, x = r + m*alpha.

    {k x} = t_k / D with t_{k+1} = (t_k + step) mod D; the step encodes a
    deep rational approximation of alpha, so |{k x}_computed - {k x}| is
    bounded by `reduction_err` for every k <= N.
    """

    step: int
    modulus: int
    reduction_err: float
    depth: int

    def floats(self, N: int) -> Iterator[float]:
        t = 0
        step, D = self.step, self.modulus
        for _ in range(N):
            t += step
            if t >= D:
                t -= D
            yield _big_ratio(t, D)

    def norm_floats(self, N: int) -> Iterator[float]:
        t = 0
        step, D = self.step, self.modulus
        for _ in range(N):
            t += step
            if t >= D:
                t -= D
            yield _big_ratio(min(t, D - t), D)


def _big_ratio(a: int, b: int) -> float:
    """a/b as a faithfully rounded double, safe for arbitrarily big ints."""
    if a == 0:
        return 0.0
    if a.bit_length() - b.bit_length() > 1000:
        return math.inf
    if b.bit_length() - a.bit_length() > 1080:
        return 0.0
    return (a << 53) // b / 9007199254740992.0


def phase_stream(handle: AlphaHandle, point: CirclePoint, N: int,
                 err_exponent: int = 25) -> PhaseStream:
    """Build the exact stepping state for {k * point}, k <= N.

    The alpha approximation is deep enough that the accumulated reduction
    error over all k <= N stays below 10^-err_exponent.
    """
    if point.radius != 0:
        raise PrecisionExhausted("phase stream", "needs an exact point")
    eps = Fraction(1, 10**err_exponent) / (N * (abs(point.m) + 1))
    approx, err, depth = handle.approx(eps)
    P, Q = approx.numerator, approx.denominator
    a, d = point.r.numerator, point.r.denominator
    D = d * Q
    step = (a * Q + d * P * point.m) % D
    total_err = float(err * N * max(1, abs(point.m))) + 2 ** -50
    return PhaseStream(step=step, modulus=D, reduction_err=total_err, depth=depth)


# -- Fourier coefficients ---------------------------------------------------


@dataclass(frozen=True)
class FourierCoefficient:
    n: int
    value: complex
    radius: float


def fourier_phi_beta_gamma(beta: CirclePoint, gamma: CirclePoint, n: int) -> FourierCoefficient:
    """phi_hat(n) = (1 - e^{-2 pi i n beta}) (1 - e^{2 pi i n gamma}) / (2 pi i n)."""
    if n == 0:
        raise ValueError("n must be nonzero")
    tb = beta.scaled(n).float_mod1()
    tg = gamma.scaled(n).float_mod1()
    fb = 1.0 - complex(math.cos(_TWO_PI * tb), -math.sin(_TWO_PI * tb))
    fg = 1.0 - complex(math.cos(_TWO_PI * tg), math.sin(_TWO_PI * tg))
    value = (fb * fg) / complex(0.0, _TWO_PI * n)
    phase_err = _TWO_PI * (abs(n) * float(beta.radius + gamma.radius) + 4e-15)
    radius = (4.0 * phase_err + 1e-15) / (_TWO_PI * abs(n))
    return FourierCoefficient(n=n, value=value, radius=radius)


def fourier_oracle_piecewise(breaks: list[float], values: list[float], n: int) -> complex:
    """Independent check: exact piecewise integral of a step function,
    sum_i v_i (e^{-2 pi i n a_i} - e^{-2 pi i n a_{i+1}}) / (2 pi i n)."""
    total = 0j
    K = len(breaks)
    for i in range(K):
        a = breaks[i]
        b = breaks[(i + 1) % K] + (1.0 if (i + 1) % K == 0 else 0.0)
        ea = complex(math.cos(-_TWO_PI * n * a), math.sin(-_TWO_PI * n * a))
        eb = complex(math.cos(-_TWO_PI * n * b), math.sin(-_TWO_PI * n * b))
        total += values[i] * (ea - eb)
    return total / complex(0.0, _TWO_PI * n)


# -- the truncated transfer solution ----------------------------------------


@dataclass(frozen=True)
class TransferSolution:
    """Truncated psi with h_n = phi_hat(n) / (1 - e^{2 pi i n alpha})."""

    N: int
    grid: int
    h: np.ndarray                      # h[k-1] = h_k for k = 1..N (h_{-k} = conj)
    l2_norm_partial: float             # sum_{0<|n|<=N} |h_n|^2
    l2_checkpoints: tuple[tuple[int, float], ...]
    residual_sup: float
    residual_l2: float
    grid_offset: float
    excluded_grid_points: int
    min_norm_alpha: float
    depth: int

    def psi_values(self) -> np.ndarray:
        """psi on the offset grid x_g = (g + offset*grid)/grid ... cached externally."""
        raise NotImplementedError("use solve_transfer's returned grids")


def _fold_series(h: np.ndarray, phases: np.ndarray, grid: int) -> np.ndarray:
    """Evaluate sum_{0<|n|<=N} h_n phases_n e^{2 pi i n g/G} on g = 0..G-1 by
    folding frequencies modulo G into one inverse FFT."""
    N = len(h)
    n = np.arange(1, N + 1)
    pos = h * phases
    c = np.zeros(grid, dtype=complex)
    np.add.at(c, n % grid, pos)
    np.add.at(c, (-n) % grid, np.conj(pos))
    return np.fft.ifft(c) * grid


def solve_transfer(handle: AlphaHandle, beta: CirclePoint, gamma: CirclePoint,
                   N: int, grid: int) -> tuple[TransferSolution, dict]:
    """Truncated transfer function and its grid residual.

    Returns (solution, grids) where grids carries the sampled x, psi(x),
    psi(x+alpha), phi(x) and residual arrays for downstream diagnostics.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    sa = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), N)
    sb = phase_stream(handle, beta, N)
    sg = phase_stream(handle, gamma, N)
    ta = np.fromiter(sa.floats(N), dtype=np.float64, count=N)
    tb = np.fromiter(sb.floats(N), dtype=np.float64, count=N)
    tg = np.fromiter(sg.floats(N), dtype=np.float64, count=N)
    na = np.minimum(ta, 1.0 - ta)
    min_na = float(na.min())
    if min_na < 1e-14:
        k_bad = int(np.argmin(na)) + 1
        raise PrecisionExhausted(f"||{k_bad} alpha||",
                                 f"small divisor {min_na:.3e} under the float floor")
    n = np.arange(1, N + 1, dtype=np.float64)
    num = (1.0 - np.exp(-2j * np.pi * tb)) * (1.0 - np.exp(2j * np.pi * tg))
    den = 2j * np.pi * n * (1.0 - np.exp(2j * np.pi * ta))
    h = num / den
    l2_cum = 2.0 * np.cumsum(np.abs(h) ** 2)
    checkpoints = tuple((int(c), float(l2_cum[c - 1]))
                        for c in (10, 100, 1000, 10_000, 100_000) if c <= N)

    offset = GRID_SHIFT / (2.0 * grid)
    phases = np.exp(2j * np.pi * (np.arange(1, N + 1) * offset % 1.0))
    psi = np.real(_fold_series(h, phases, grid))
    psi_alpha = np.real(_fold_series(h, phases * np.exp(2j * np.pi * ta), grid))

    x = (np.arange(grid) + GRID_SHIFT / 2.0) / grid
    bfl = beta.float_mod1()
    gfl = gamma.float_mod1()
    phi = _phi_beta_gamma_floats(x, bfl, gfl)
    margin = 1e-9
    near = np.zeros(grid, dtype=bool)
    for b in (0.0, bfl, (1.0 - gfl) % 1.0, (bfl - gfl) % 1.0):
        for s in (-1.0, 0.0, 1.0):
            near |= np.abs(x - (b + s)) < margin
            near |= np.abs(((x + gfl) % 1.0) - (b + s)) < margin
    resid = phi - (psi - psi_alpha)
    ok = ~near
    sup = float(np.max(np.abs(resid[ok]))) if ok.any() else float("nan")
    l2 = float(np.sqrt(np.mean(resid[ok] ** 2))) if ok.any() else float("nan")

    sol = TransferSolution(
        N=N, grid=grid, h=h,
        l2_norm_partial=float(l2_cum[-1]),
        l2_checkpoints=checkpoints,
        residual_sup=sup, residual_l2=l2,
        grid_offset=offset,
        excluded_grid_points=int(near.sum()),
        min_norm_alpha=min_na,
        depth=max(sa.depth, sb.depth, sg.depth),
    )
    grids = {"x": x, "psi": psi, "psi_alpha": psi_alpha, "phi": phi,
             "residual": resid, "included": ok}
    return sol, grids


def _phi_beta_gamma_floats(x: np.ndarray, beta_f: float, gamma_f: float) -> np.ndarray:
    in1 = (x % 1.0) < beta_f
    in2 = ((x + gamma_f) % 1.0) < beta_f
    return in1.astype(np.float64) - in2.astype(np.float64)


def indicator_l2_distance(grids: dict, beta_f: float) -> float:
    """Grid-L2 distance between the truncated psi and mean-zeroed 1_{[0,beta)}."""
    x = grids["x"]
    ref = (x < beta_f).astype(np.float64) - beta_f
    ok = grids["included"]
    diff = grids["psi"] - ref
    return float(np.sqrt(np.mean(diff[ok] ** 2)))


# -- nonnegative-term series reports ----------------------------------------


@dataclass(frozen=True)
class SeriesReport:
    series_id: str
    cutoffs: tuple[int, ...]
    partial_sums: tuple[float, ...]
    widths: tuple[float, ...]
    meta: dict = field(default_factory=dict)

    def gap(self, n_lo: int, n_hi: int) -> float:
        """S_{n_hi} - S_{n_lo} from the recorded cutoffs."""
        table = dict(zip(self.cutoffs, self.partial_sums))
        return table[n_hi] - table[n_lo]


_DEF_CUTOFFS = (1_000, 2_000, 10_000, 20_000, 100_000, 200_000)


def _series_sum(term_iter: Iterator[float], N: int, cutoffs, rel_err: float,
                series_id: str, meta: Optional[dict] = None) -> SeriesReport:
    """Fixed-order (ascending k) accumulation, doubled for the +-n symmetry."""
    marks = sorted({c for c in cutoffs if c <= N} | {N})
    sums, widths = [], []
    total = 0.0
    width = 0.0
    mark_i = 0
    for k, t in enumerate(term_iter, start=1):
        total += t
        width += abs(t) * rel_err + 5e-324
        if mark_i < len(marks) and k == marks[mark_i]:
            sums.append(2.0 * total)
            widths.append(2.0 * width)
            mark_i += 1
    return SeriesReport(series_id=series_id, cutoffs=tuple(marks),
                        partial_sums=tuple(sums), widths=tuple(widths),
                        meta=meta or {})


def criterion_series(handle: AlphaHandle, beta: CirclePoint, gamma: CirclePoint,
                     N: int, cutoffs=_DEF_CUTOFFS) -> SeriesReport:
    """Partial sums of sum_{0<|n|<=N} ||n b||^2 ||n g||^2 / (n^2 ||n a||^2)."""
    sa = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), N)
    sb = phase_stream(handle, beta, N)
    sg = phase_stream(handle, gamma, N)

    def terms():
        it = zip(sa.norm_floats(N), sb.norm_floats(N), sg.norm_floats(N))
        for k, (na, nb, ng) in enumerate(it, start=1):
            yield (nb * nb * ng * ng) / (k * k * na * na)

    return _series_sum(terms(), N, cutoffs, 1e-9, "criterion",
                       {"alpha_depth": sa.depth})


def h4_series(handle: AlphaHandle, beta: CirclePoint, N: int,
              cutoffs=_DEF_CUTOFFS) -> SeriesReport:
    """Partial sums of sum_{0<|n|<=N} ||n b||^4 / (n^2 ||n a||^2)."""
    sa = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), N)
    sb = phase_stream(handle, beta, N)

    def terms():
        it = zip(sa.norm_floats(N), sb.norm_floats(N))
        for k, (na, nb) in enumerate(it, start=1):
            yield (nb ** 4) / (k * k * na * na)

    return _series_sum(terms(), N, cutoffs, 1e-9, "h4", {"alpha_depth": sa.depth})


# -- integer classification: the resonant sets -----------------------------


class ResonanceSets:
    """Membership tests for the two resonant index families:

    * multiples:   k = s q_n with 1 <= s <= a_{n+1} for some n >= 1
    * near:        k in [q_n, q_{n+1}) with ||k alpha|| < 1/(4 q_n)
    """

    def __init__(self, handle: AlphaHandle, N: int):
        self.handle = handle
        self.N = N
        self.q: list[int] = []
        self.a: list[int] = []
        n = 0
        while True:
            _, qn = handle.convergent(n)
            self.q.append(qn)
            self.a.append(handle.partial_quotient(n + 1))
            if qn > N:
                break
            n += 1
        self._norm_cache: dict[int, float] = {}

    def block_index(self, k: int) -> int:
        """Largest n >= 1 with q_n <= k, or 0 when k < q_1."""
        n = 0
        for i in range(1, len(self.q)):
            if self.q[i] <= k:
                n = i
        return n

    def in_multiples(self, k: int) -> bool:
        for i in range(1, len(self.q)):
            qn = self.q[i]
            if qn > k:
                break
            if k % qn == 0 and k // qn <= self.a[i]:
                return True
        return False

    def in_near(self, k: int, norm_k: float) -> bool:
        n = self.block_index(k)
        if n < 1:
            return False
        qn = self.q[n]
        bound = 1.0 / (4.0 * qn)
        if norm_k > bound * (1.0 + 1e-9):
            return False
        if norm_k < bound * (1.0 - 1e-9):
            return True
        iv = self.handle.norm_interval(k, _F0, Fraction(1, 8 * qn * qn * 2**20))
        target = Fraction(1, 4 * qn)
        while not (iv.hi < target or iv.lo > target):
            iv = self.handle.norm_interval(k, _F0, iv.width / 2**10)
        return iv.hi < target


# -- appendix estimate bundle ------------------------------------------------


def _support_maps(digits: OstrowskiDigits):
    support = sorted(j for j, b in digits.digits)
    table = digits.as_dict()

    def ell(n: int) -> Optional[int]:
        prev = [j for j in support if j <= n - 1]
        return prev[-1] if prev else None

    def mm(n: int) -> Optional[int]:
        nxt = [j for j in support if j >= n]
        return nxt[0] if nxt else None

    return table, ell, mm


def appendix_series(handle: AlphaHandle, digits: OstrowskiDigits, N: int,
                    cutoffs=_DEF_CUTOFFS) -> dict[str, SeriesReport]:
    """The eight comparison series behind the fourth-power summability bound.

    k-indexed parts A..F (classified against the resonant sets), plus the
    n-indexed parts G and H. Terms whose support indices are undefined are
    skipped and counted in the report metadata.
    """
    table, ell, mm = _support_maps(digits)
    beta = synthesize(handle, digits)
    sets = ResonanceSets(handle, N)
    sa = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), N)
    sb = phase_stream(handle, beta, N)

    marks = sorted({c for c in cutoffs if c <= N} | {N})
    acc = {sid: [0.0, 0.0] for sid in "ABCDEF"}
    out_sums = {sid: [] for sid in "ABCDEF"}
    out_widths = {sid: [] for sid in "ABCDEF"}
    skipped = {sid: 0 for sid in "ABCDEF"}
    counts = {"multiples": 0, "near": 0, "neither": 0}
    rel = 1e-9

    def bump(sid, t):
        acc[sid][0] += t
        acc[sid][1] += t * rel

    mark_i = 0
    it = zip(sa.norm_floats(N), sb.norm_floats(N))
    for k, (na, nb) in enumerate(it, start=1):
        n = sets.block_index(k)
        in_mult = sets.in_multiples(k)
        in_near = sets.in_near(k, na)
        counts["multiples"] += in_mult
        counts["near"] += in_near
        counts["neither"] += not (in_mult or in_near)
        ln, mn = ell(n), mm(n)
        ln1, mn1 = ell(n + 1), mm(n + 1)
        # A/B split on ||k alpha|| against 1/q_{ell(n)}
        if ln is None:
            skipped["A"] += 1
            skipped["B"] += 1
        else:
            q_ln = sets.handle.convergent(ln)[1]
            if na >= 1.0 / q_ln:
                bump("A", 1.0 / (k * k * na * na))
            else:
                b_ln = table[ln]
                bump("B", (b_ln * b_ln) * float(q_ln) ** 2 / (k * k))
        if not in_mult and not in_near:
            if mn is None:
                skipped["C"] += 1
            else:
                q_mn1 = handle.convergent(mn + 1)[1]
                b_mn = table[mn]
                bump("C", (b_mn * b_mn) / _sq_float(q_mn1) / (na * na))
        if in_near and not in_mult:
            bump("D", (nb * nb) / (k * k * na * na))
            if ln1 is None:
                skipped["E"] += 1
            else:
                q_ln1 = handle.convergent(ln1)[1]
                bump("E", (table[ln1] ** 2) * float(q_ln1) ** 2 / (k * k))
            if mn1 is None:
                skipped["F"] += 1
            else:
                q_mn2 = handle.convergent(mn1 + 1)[1]
                bump("F", (table[mn1] ** 2) / _sq_float(q_mn2) / (na * na))
        if mark_i < len(marks) and k == marks[mark_i]:
            for sid in "ABCDEF":
                out_sums[sid].append(acc[sid][0])
                out_widths[sid].append(acc[sid][1])
            mark_i += 1

    reports = {
        sid: SeriesReport(series_id=sid, cutoffs=tuple(marks),
                          partial_sums=tuple(out_sums[sid]),
                          widths=tuple(out_widths[sid]),
                          meta={"skipped": skipped[sid], "classified": dict(counts)})
        for sid in "ABCDEF"
    }
    reports.update(_gh_series(handle, digits, table, ell, mm))
    return reports


def _sq_float(q: int) -> float:
    """q^2 as float, saturating to inf instead of overflowing for huge q."""
    if q.bit_length() > 500:
        return math.inf
    return float(q) ** 2


def _gh_series(handle: AlphaHandle, digits: OstrowskiDigits, table, ell, mm):
    """n-indexed parts: G over the trailing-support digit, H over the leading."""
    top = max((j for j, _ in digits.digits), default=0)
    n_max = top + 6
    sums_g, sums_h, w_g, w_h = [], [], [], []
    tg = th = 0.0
    skip_g = skip_h = 0
    zeta2 = math.pi * math.pi / 6.0
    for n in range(1, n_max + 1):
        a_next = handle.partial_quotient(n + 1)
        qn = handle.convergent(n)[1]
        qn1 = handle.convergent(n + 1)[1]
        ln, mn = ell(n), mm(n)
        if ln is None:
            skip_g += 1
        else:
            q_ln = handle.convergent(ln)[1]
            inner = min(zeta2, _partial_zeta2(a_next))
            tg += (table[ln] ** 2) * _ratio_sq(q_ln, qn) * inner
        if mn is None:
            skip_h += 1
        else:
            q_mn1 = handle.convergent(mn + 1)[1]
            b4 = float(table[mn]) ** 4
            th += b4 * _ratio4(qn, qn1, a_next, q_mn1)
        sums_g.append(tg)
        sums_h.append(th)
        w_g.append(abs(tg) * 1e-9)
        w_h.append(abs(th) * 1e-9)
    cut = tuple(range(1, n_max + 1))
    return {
        "G": SeriesReport("G", cut, tuple(sums_g), tuple(w_g), {"skipped": skip_g}),
        "H": SeriesReport("H", cut, tuple(sums_h), tuple(w_h), {"skipped": skip_h}),
    }


def _partial_zeta2(A: int) -> float:
    T = min(A, 10_000)
    s = sum(1.0 / (i * i) for i in range(1, T + 1))
    if A > T:
        s += 1.0 / T  # integral bound on the remainder
    return s


def _ratio_sq(a: int, b: int) -> float:
    return _big_ratio(a * a, b * b)


def _ratio4(qn: int, qn1: int, a_next: int, qm1: int) -> float:
    return _big_ratio(a_next * qn * qn * qn1 * qn1, qm1 ** 4)


# -- tail-sum and inverse-norm validators -----------------------------------


@dataclass(frozen=True)
class TailSumReport:
    series_id: str
    n_index: int
    p: int
    lhs_hi: float
    lhs_lo: float
    rhs: float
    ratio: float
    constant: float
    ok: bool
    cutoff_index: int
    tail_bound: float


_ENUM_GUARD = 4_000_000


def tail_sum_checks(handle: AlphaHandle, n_index: int, p: int,
                    tail_window: int = 6) -> dict[str, TailSumReport]:
    """Finite verification of the three weighted tail/head estimates.

    Infinite tails are cut at q_{n+tail_window}; the remainder is bounded by
    the nonnegative-BV tail bound 2(mu/q + V/q^2) evaluated at the cut, which
    is the same inequality the estimates themselves rest on.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    _, qn = handle.convergent(n_index)
    _, qcut = handle.convergent(n_index + tail_window)
    if qcut > _ENUM_GUARD:
        raise IndexBeyondSpec(
            f"tail check would enumerate up to q_{n_index + tail_window} = {qcut}")
    stream = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), qcut)
    norms = np.fromiter(stream.norm_floats(qcut), dtype=np.float64, count=qcut)
    k = np.arange(1, qcut + 1, dtype=np.float64)
    thr = 1.0 / p

    head = slice(0, qn - 1)          # k in [1, q_n)
    tail = slice(qn - 1, qcut)       # k in [q_n, q_cut]

    # (1) sum_{k>=q_n, ||k a||>=1/p} 1/(k^2 ||k a||^2)
    sel = norms[tail] >= thr
    lhs1 = float(np.sum(1.0 / (k[tail][sel] ** 2 * norms[tail][sel] ** 2)))
    mu1 = max(0.0, 2.0 * (p - 2.0))
    v1 = max(0.0, 4.0 * p * p - 8.0)
    t1 = 2.0 * (mu1 / qcut + v1 / qcut**2)
    rhs1 = p / qn + p * p / (qn * qn)
    r1 = (lhs1 + t1) / rhs1

    # (2) sum_{k>=q_n, ||k a||<=1/p} 1/k^2
    sel2 = norms[tail] <= thr
    lhs2 = float(np.sum(1.0 / k[tail][sel2] ** 2))
    t2 = 2.0 * (2.0 / (p * qcut) + 2.0 / qcut**2)
    rhs2 = 1.0 / (qn * p) + 1.0 / (qn * qn)
    r2 = (lhs2 + t2) / rhs2

    # (3) sum_{0<k<q_n, ||k a||>=1/p} 1/||k a||^2  (finite head, exact)
    sel3 = norms[head] >= thr
    lhs3 = float(np.sum(1.0 / norms[head][sel3] ** 2))
    rhs3 = p * (qn + p)
    r3 = lhs3 / rhs3

    rel = 1e-8
    return {
        "tail-weighted-norms": TailSumReport(
            "tail-weighted-norms", n_index, p, lhs1 + t1, lhs1 * (1 - rel), rhs1,
            r1, 8.0, r1 <= 8.0, n_index + tail_window, t1),
        "tail-small-norms": TailSumReport(
            "tail-small-norms", n_index, p, lhs2 + t2, lhs2 * (1 - rel), rhs2,
            r2, 4.0, r2 <= 4.0, n_index + tail_window, t2),
        "head-inverse-norms": TailSumReport(
            "head-inverse-norms", n_index, p, lhs3 * (1 + rel), lhs3 * (1 - rel), rhs3,
            r3, 7.0, r3 <= 7.0, n_index, 0.0),
    }


def bv_tail_bound_check(handle: AlphaHandle, n_index: int) -> dict:
    """Sanity case of the nonnegative-BV tail bound with f == 1:
    sum_{k>=q_n} 1/k^2 <= 2/q_n (mu = 1, V = 0)."""
    _, qn = handle.convergent(n_index)
    lhs = float(sum(Fraction(1, k * k) for k in range(qn, 10 * qn)))
    lhs_hi = lhs + 1.0 / (10 * qn - 1)
    rhs = 2.0 / qn
    return {"lhs_hi": lhs_hi, "rhs": rhs, "ok": lhs_hi <= rhs}


@dataclass(frozen=True)
class InverseNormReport:
    n_index: int
    q: int
    sum_interval: tuple[float, float]
    ratio_hi: float
    constant: float
    ok_ratio: bool
    head_terms: int
    uniqueness_ok: bool
    lower_bound_ok: bool
    hits: tuple[tuple[int, int], ...]   # (s, k) pairs with a small-norm hit


def inverse_norm_checks(handle: AlphaHandle, n_index: int, s_max: int = 100,
                        head: int = 10_000) -> InverseNormReport:
    """Two exact facts about k < q_n and the blocks above it.

    a) sum_{k=1}^{q_n - 1} ||k alpha||^{-2} <= C q_n^2 with C frozen at 8.
       Computed as an exact head over the smallest ||k alpha|| (located via
       the modular inverse of p_n mod q_n) plus a smooth-tail enclosure from
       the three-distance spacing |{k alpha} - j/q_n| < 1/q_{n+1}.
    b) per multiplier s <= min(a_{n+1}, s_max): at most one k = s q_n + r,
       r in [1, q_n), with ||k alpha|| < 1/(4 q_n); any hit has k >= q_{n+1}/4.
    """
    pn, qn = handle.convergent(n_index)
    _, qn1 = handle.convergent(n_index + 1)
    if qn <= 1:
        return InverseNormReport(n_index, qn, (0.0, 0.0), 0.0, 8.0, True, 0,
                                 True, True, ())
    sum_lo, sum_hi, used_head = _inverse_square_sum(handle, n_index, head)
    ratio_hi = sum_hi / float(qn) ** 2
    a_next = handle.partial_quotient(n_index + 1)
    hits = []
    unique = True
    lower_ok = True
    s_top = min(a_next, s_max)
    inv = pow(pn % qn, -1, qn)
    c = _big_ratio(qn, qn1)
    j_cap = int(0.25 + (s_top + 1) * c) + 2
    quarter = Fraction(1, 4 * qn)
    for s in range(1, s_top + 1):
        found = []
        for j in range(1, min(j_cap, (qn + 1) // 2) + 1):
            r1 = (j * inv) % qn
            for r in (r1, qn - r1):
                if not 1 <= r < qn:
                    continue
                kk = s * qn + r
                nf = _norm_float(handle, kk)
                if nf > 1.5 / (4 * qn):
                    continue
                iv = handle.norm_interval(kk, _F0, quarter / 2**10)
                while not (iv.hi < quarter or iv.lo > quarter):
                    iv = handle.norm_interval(kk, _F0, iv.width / 2**10)
                if iv.hi < quarter and kk not in found:
                    found.append(kk)
        if len(found) > 1:
            unique = False
        for kk in found:
            hits.append((s, kk))
            if 4 * kk < qn1:
                lower_ok = False
    return InverseNormReport(
        n_index=n_index, q=qn, sum_interval=(sum_lo, sum_hi), ratio_hi=ratio_hi,
        constant=8.0, ok_ratio=ratio_hi <= 8.0, head_terms=used_head,
        uniqueness_ok=unique, lower_bound_ok=lower_ok, hits=tuple(hits))


def _norm_float(handle: AlphaHandle, k: int) -> float:
    iv = handle.norm_interval(k, _F0, Fraction(1, 2**40) / max(1, k))
    return float(iv.mid)


def _inverse_square_sum(handle: AlphaHandle, n_index: int,
                        head: int) -> tuple[float, float, int]:
    pn, qn = handle.convergent(n_index)
    _, qn1 = handle.convergent(n_index + 1)
    M = (qn - 1) // 2
    if qn - 1 <= 2 * head + 4:
        stream = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), qn - 1)
        total = 0.0
        for nf in stream.norm_floats(qn - 1):
            total += 1.0 / (nf * nf)
        return total * (1 - 1e-8), total * (1 + 1e-8), qn - 1
    inv = pow(pn % qn, -1, qn)
    T = min(head, M - 1)
    total = 0.0
    for j in range(1, T + 1):
        r1 = (j * inv) % qn
        for k in (r1, qn - r1):
            nf = _norm_float(handle, k)
            total += 1.0 / (nf * nf)
    c = _big_ratio(qn, qn1)
    qn_f2 = float(qn) ** 2
    # tail over j = T+1..M, at most two k's per j, ||k a|| in (j -+ c)/q_n
    tail_hi = 2.0 * qn_f2 / (T - c)
    tail_lo = 2.0 * qn_f2 * max(0.0, 1.0 / (T + 1 + c) - 1.0 / (M + c))
    return (total * (1 - 1e-8) + tail_lo, total * (1 + 1e-8) + tail_hi, 2 * T)


def inverse_square_sum_bruteforce(handle: AlphaHandle, n_index: int) -> float:
    """Low-tech oracle for the inverse-square sum (small q_n only)."""
    _, qn = handle.convergent(n_index)
    if qn - 1 > 500_000:
        raise IndexBeyondSpec("brute force capped at 500k terms")
    stream = phase_stream(handle, CirclePoint.lattice(_F0, 1, handle), max(qn - 1, 1))
    return sum(1.0 / (nf * nf) for nf in stream.norm_floats(qn - 1))
