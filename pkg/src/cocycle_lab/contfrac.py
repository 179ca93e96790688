"""Exact continued-fraction engine.

An irrational alpha in (0,1) is held as its partial-quotient spec, never as
a float. Convergents (p_n, q_n) are exact big integers from the standard
recurrence with p_{-1}=1, p_0=0, q_{-1}=0, q_0=1; alpha is located between
consecutive convergents, which gives optimal-width rational enclosures.
All comparisons anywhere in the library route through these enclosures.
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ._expr import IntExpr, parse_int_expr
from .errors import IndexBeyondSpec, SpecParseError

DEFAULT_MAX_DEPTH = 200


def max_refinement_depth() -> int:
    """Depth cap for enclosure refinement loops (env-overridable)."""
    cap = os.environ.get("COCYCLE_LAB_PRECISION_CAP")
    if cap:
        return max(1, int(cap))
    return DEFAULT_MAX_DEPTH


_RULES = {
    "factorial": parse_int_expr("n!"),
    "pow2": parse_int_expr("2^n"),
}


@dataclass(frozen=True)
class AlphaSpec:
    """Partial-quotient specification for alpha = [0; a_1, a_2, ...].

    kind is one of:
      * "explicit": finite prefix, errors beyond it
      * "periodic": preperiod followed by a repeating nonempty period
      * "rule":     a named growth rule evaluated at each index (a_n = rule(n))
      * "sparse":   prescribed huge quotients a_{j(n)} on a strictly increasing
                    sparse index set, filler value elsewhere
    """

    kind: str
    quotients: tuple[int, ...] = ()
    preperiod: tuple[int, ...] = ()
    period: tuple[int, ...] = ()
    rule: str = ""
    j_expr: IntExpr | None = None
    a_expr: IntExpr | None = None
    filler: int = 1
    # memo for the sparse index sequence; grown on demand, guarded by handle lock
    _sparse_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "explicit":
            _check_quotients(self.quotients)
        elif self.kind == "periodic":
            _check_quotients(self.preperiod + self.period)
            if not self.period:
                raise ValueError("periodic spec needs a nonempty period")
        elif self.kind == "rule":
            if self.rule not in _RULES:
                raise ValueError(f"unknown rule {self.rule!r}; known: {sorted(_RULES)}")
        elif self.kind == "sparse":
            if self.j_expr is None or self.a_expr is None:
                raise ValueError("sparse spec needs j and a_j expressions")
            if self.filler < 1:
                raise ValueError("filler quotient must be >= 1")
        else:
            raise ValueError(f"unknown spec kind {self.kind!r}")

    def quotient(self, n: int) -> int:
        """Partial quotient a_n, n >= 1. Raises IndexBeyondSpec when undefined."""
        if n < 1:
            raise IndexBeyondSpec(f"partial quotient index {n} < 1")
        if self.kind == "explicit":
            if n > len(self.quotients):
                raise IndexBeyondSpec(
                    f"explicit spec has {len(self.quotients)} quotients, asked for a_{n}"
                )
            return self.quotients[n - 1]
        if self.kind == "periodic":
            if n <= len(self.preperiod):
                return self.preperiod[n - 1]
            k = (n - len(self.preperiod) - 1) % len(self.period)
            return self.period[k]
        if self.kind == "rule":
            value = _RULES[self.rule](n)
            if value < 1:
                raise IndexBeyondSpec(f"rule {self.rule!r} gives a_{n} = {value} < 1")
            return value
        return self._sparse_quotient(n)

    def _sparse_quotient(self, n: int) -> int:
        table = self._sparse_cache.setdefault("table", {})
        last = self._sparse_cache.get("last", (-1, 0))  # (max m covered, next term index)
        covered, term = last
        while covered < n:
            j = self.j_expr(term)
            if j < 1:
                raise SpecParseError(self.j_expr.text, "j", 0, f"j({term}) = {j} < 1")
            prev = self._sparse_cache.get("prev_j", 0)
            if term > 0 and j <= prev:
                raise SpecParseError(
                    self.j_expr.text, "j", 0, f"index sequence not strictly increasing at n={term}"
                )
            value = self.a_expr(term)
            if value < 1:
                raise SpecParseError(self.a_expr.text, "a_j", 0, f"a_j({term}) = {value} < 1")
            table[j] = value
            self._sparse_cache["prev_j"] = j
            covered = j
            term += 1
            self._sparse_cache["last"] = (covered, term)
        return table.get(n, self.filler)

    def sparse_indices(self, count: int) -> tuple[int, ...]:
        """First `count` prescribed indices j(0), ..., j(count-1) of a sparse spec."""
        if self.kind != "sparse":
            raise ValueError("only sparse specs carry a prescribed index sequence")
        out = []
        for n in range(count):
            j = self.j_expr(n)
            out.append(j)
        for a, b in zip(out, out[1:]):
            if b <= a:
                raise SpecParseError(self.j_expr.text, "j", 0, "indices not strictly increasing")
        return tuple(out)


def _check_quotients(values: Iterable[int]):
    for i, a in enumerate(values, start=1):
        if a < 1:
            raise ValueError(f"partial quotient a_{i} = {a} must be >= 1")


@dataclass(frozen=True)
class RationalInterval:
    """Closed interval [lo, hi] with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x: Fraction) -> bool:
        return self.lo <= x <= self.hi

    def subset_of(self, other: "RationalInterval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def strictly_below(self, other: "RationalInterval") -> bool:
        return self.hi < other.lo

    def shift(self, k) -> "RationalInterval":
        return RationalInterval(self.lo + k, self.hi + k)

    def scale(self, c) -> "RationalInterval":
        if c >= 0:
            return RationalInterval(self.lo * c, self.hi * c)
        return RationalInterval(self.hi * c, self.lo * c)

    def __float__(self) -> float:
        return float(self.mid)


@dataclass(frozen=True)
class NormValue:
    """Enclosure of ||k*alpha|| (distance of k*alpha to the integers)."""

    k: int
    enclosure: RationalInterval
    depth_used: int


class AlphaHandle:
    """Lazy exact handle on an irrational alpha given by an AlphaSpec.

    Convergent caches are append-only and guarded by a lock, so concurrent
    readers never observe a partially written entry; every operation is a
    pure function of (spec, arguments).
    """

    def __init__(self, spec: AlphaSpec):
        self.spec = spec
        # index n maps to slot n+1; slot 0 holds n = -1
        self._p = [1, 0]
        self._q = [0, 1]
        self._lock = threading.Lock()

    def __repr__(self):
        return f"AlphaHandle({format_alpha_spec(self.spec)!r}, depth_reached={self.depth_reached})"

    @property
    def depth_reached(self) -> int:
        return len(self._q) - 2

    def partial_quotient(self, n: int) -> int:
        return self.spec.quotient(n)

    def observed_partial_quotient_max(self, horizon: int) -> int:
        if horizon < 1:
            raise IndexBeyondSpec("horizon must be >= 1")
        return max(self.spec.quotient(n) for n in range(1, horizon + 1))

    def _extend_to(self, n: int):
        with self._lock:
            while len(self._q) < n + 2:
                m = len(self._q) - 1  # next convergent index
                a = self.spec.quotient(m)
                self._p.append(a * self._p[-1] + self._p[-2])
                self._q.append(a * self._q[-1] + self._q[-2])

    def convergent(self, n: int) -> tuple[int, int]:
        """Exact (p_n, q_n), n >= -1."""
        if n < -1:
            raise IndexBeyondSpec(f"convergent index {n} < -1")
        if len(self._q) < n + 2:
            self._extend_to(n)
        return self._p[n + 1], self._q[n + 1]

    def enclosure(self, depth: int) -> RationalInterval:
        """Interval with endpoints p_depth/q_depth and p_{depth+1}/q_{depth+1}."""
        if depth < 1:
            raise IndexBeyondSpec("enclosure depth must be >= 1")
        p0, q0 = self.convergent(depth)
        p1, q1 = self.convergent(depth + 1)
        a, b = Fraction(p0, q0), Fraction(p1, q1)
        return RationalInterval(min(a, b), max(a, b))

    # -- refinement helpers ------------------------------------------------

    def approx(self, eps: Fraction) -> tuple[Fraction, Fraction, int]:
        """(value, error_bound, depth): |alpha - value| <= error_bound <= eps."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        depth = 1
        cap = max_refinement_depth()
        while True:
            p0, q0 = self.convergent(depth)
            p1, q1 = self.convergent(depth + 1)
            width = Fraction(1, q0 * q1)
            if width <= eps:
                return Fraction(p1, q1), width, depth
            if depth >= cap:
                raise IndexBeyondSpec(
                    f"cannot enclose alpha to width {eps} within depth cap {cap}"
                )
            depth = min(cap, depth + max(1, depth // 2))

    def value_interval(self, m: int, r: Fraction, target_width: Fraction) -> RationalInterval:
        """Enclosure of the real number r + m*alpha (not reduced mod 1)."""
        if m == 0:
            return RationalInterval(r, r)
        eps = target_width / abs(m)
        value, err, _ = self.approx(eps)
        lo = r + m * value - abs(m) * err
        hi = r + m * value + abs(m) * err
        return RationalInterval(lo, hi)

    def frac_interval(self, m: int, r: Fraction, target_width: Fraction) -> RationalInterval:
        """Enclosure of {r + m*alpha}, shifted to meet [0, 1).

        The returned interval has width <= target_width and its midpoint in
        [0, 1); when the point is within target_width of 0 the interval may
        spill slightly below 0 or above 1 (callers compare cyclically).
        """
        iv = self.value_interval(m, r, target_width)
        k = math.floor(iv.mid)
        out = iv.shift(-k)
        if out.lo >= 1:
            out = out.shift(-1)
        elif out.hi <= 0 and not (out.lo == 0 and out.hi == 0):
            out = out.shift(1)
        return out

    def norm_interval(self, m: int, r: Fraction, target_width: Fraction) -> RationalInterval:
        """Enclosure of ||r + m*alpha|| with width <= target_width."""
        iv = self.value_interval(m, r, target_width / 2)
        k = _nearest_int(iv.mid)
        c = iv.shift(-k)  # centered near 0, |mid| <= 1/2 + width
        lo, hi = abs(c.lo), abs(c.hi)
        if c.lo <= 0 <= c.hi:
            return RationalInterval(Fraction(0), min(max(lo, hi), Fraction(1, 2)))
        a, b = min(lo, hi), max(lo, hi)
        return RationalInterval(a, min(b, Fraction(1, 2)))

    def norm_k_alpha(self, k: int, target_width: Fraction) -> NormValue:
        """Enclosure of ||k*alpha|| of width <= target_width."""
        if k == 0:
            raise ValueError("k must be nonzero")
        if target_width <= 0:
            raise ValueError("target width must be positive")
        eps = target_width / (2 * abs(k))
        _, _, depth = self.approx(eps)
        iv = self.norm_interval(k, Fraction(0), target_width)
        return NormValue(k=k, enclosure=iv, depth_used=depth)

    def alpha_float(self) -> float:
        """Double-precision alpha with error below 1 ulp of the reduction."""
        value, _, _ = self.approx(Fraction(1, 2**70))
        return float(value)

    def corrupt_cache_for_testing(self, n: int):
        """Fault-injection hook: overwrite the cached p_n with p_n + 1.

        Only for negative tests of the determinant-identity checker.
        """
        self.convergent(n)
        with self._lock:
            self._p[n + 1] += 1


def _nearest_int(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


# -- spec mini-language --------------------------------------------------
#
# periodic:[0;1]            golden-type, the whole list repeats
# periodic:[0;1,3|2,9]      preperiod 1,3 then period 2,9
# explicit:[0;1,3,2,9]      finite prefix, errors beyond
# rule:factorial            a_n = n!
# rule:pow2                 a_n = 2^n
# sparse:{j:"3n+1", a_j:"n!", filler:1}


def parse_alpha_spec(text: str) -> AlphaSpec:
    text = text.strip()
    if ":" not in text:
        raise SpecParseError(text, text[:12], 0, "expected '<kind>:<body>'")
    kind, body = text.split(":", 1)
    kind = kind.strip()
    if kind in ("explicit", "periodic"):
        return _parse_bracket_list(text, kind, body.strip())
    if kind == "rule":
        name = body.strip()
        if name not in _RULES:
            raise SpecParseError(text, name, len(text) - len(name), "unknown rule name")
        return AlphaSpec(kind="rule", rule=name)
    if kind == "sparse":
        return _parse_sparse(text, body.strip())
    raise SpecParseError(text, kind, 0, "unknown spec kind")


def _parse_bracket_list(text: str, kind: str, body: str) -> AlphaSpec:
    if not (body.startswith("[") and body.endswith("]")):
        raise SpecParseError(text, body[:1] or "<end>", text.find(body), "expected '[...]'")
    inner = body[1:-1]
    if not inner.startswith("0;"):
        raise SpecParseError(text, inner[:2], text.find(inner), "expected leading '0;'")
    rest = inner[2:]
    if kind == "explicit":
        return AlphaSpec(kind="explicit", quotients=_int_list(text, rest))
    if "|" in rest:
        pre, per = rest.split("|", 1)
        return AlphaSpec(kind="periodic", preperiod=_int_list(text, pre, allow_empty=True),
                         period=_int_list(text, per))
    return AlphaSpec(kind="periodic", period=_int_list(text, rest))


def _int_list(text: str, chunk: str, allow_empty: bool = False) -> tuple[int, ...]:
    chunk = chunk.strip()
    if not chunk:
        if allow_empty:
            return ()
        raise SpecParseError(text, "<empty>", text.find(chunk) if chunk else 0, "empty list")
    out = []
    for piece in chunk.split(","):
        piece = piece.strip()
        if not piece.isdigit():
            raise SpecParseError(text, piece, text.find(piece), "expected a positive integer")
        out.append(int(piece))
    return tuple(out)


def _parse_sparse(text: str, body: str) -> AlphaSpec:
    if not (body.startswith("{") and body.endswith("}")):
        raise SpecParseError(text, body[:1] or "<end>", text.find(body), "expected '{...}'")
    fields = {}
    for piece in _split_top_level(body[1:-1]):
        if ":" not in piece:
            raise SpecParseError(text, piece, text.find(piece), "expected 'key:value'")
        key, value = piece.split(":", 1)
        fields[key.strip()] = value.strip()
    missing = {"j", "a_j"} - fields.keys()
    if missing:
        raise SpecParseError(text, body, text.find(body), f"missing fields {sorted(missing)}")
    j_expr = parse_int_expr(_unquote(fields["j"]))
    a_expr = parse_int_expr(_unquote(fields["a_j"]))
    filler_text = fields.get("filler", "1")
    if not filler_text.isdigit():
        raise SpecParseError(text, filler_text, text.find(filler_text), "filler must be an integer")
    return AlphaSpec(kind="sparse", j_expr=j_expr, a_expr=a_expr, filler=int(filler_text))


def _split_top_level(s: str) -> list[str]:
    out, depth, start = [], 0, 0
    for i, ch in enumerate(s):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append(s[start:i])
            start = i + 1
    if s[start:].strip():
        out.append(s[start:])
    return out


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


def format_alpha_spec(spec: AlphaSpec) -> str:
    if spec.kind == "explicit":
        return "explicit:[0;" + ",".join(map(str, spec.quotients)) + "]"
    if spec.kind == "periodic":
        if spec.preperiod:
            return ("periodic:[0;" + ",".join(map(str, spec.preperiod)) + "|"
                    + ",".join(map(str, spec.period)) + "]")
        return "periodic:[0;" + ",".join(map(str, spec.period)) + "]"
    if spec.kind == "rule":
        return f"rule:{spec.rule}"
    return 'sparse:{j:"%s", a_j:"%s", filler:%d}' % (spec.j_expr.text, spec.a_expr.text, spec.filler)


def golden_handle() -> AlphaHandle:
    """[0;1,1,1,...], the inverse golden ratio."""
    return AlphaHandle(parse_alpha_spec("periodic:[0;1]"))
