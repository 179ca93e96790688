"""Tiny integer expression language for rule/sparse quotient specs.

Supported over the single variable ``n``: integer literals, ``+ - *``,
integer power ``^`` (or ``**``), postfix factorial ``!``, parentheses,
and implicit multiplication as in ``3n+1`` or ``(n+2)!2^n``.
Everything evaluates in exact Python integers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

from .errors import SpecParseError

_TOKEN_RE = re.compile(r"\s*(\d+|\*\*|[n+\-*()!^])")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = text[pos:].lstrip()[:1] or text[pos]
            raise SpecParseError(text, bad, pos, "unknown character")
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


@dataclass(frozen=True)
class IntExpr:
    """Parsed expression; call it with an integer n."""

    text: str
    _fn: Callable[[int], int]

    def __call__(self, n: int) -> int:
        return self._fn(n)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, reason: str):
        if self.i < len(self.tokens):
            tok, pos = self.tokens[self.i]
        else:
            tok, pos = "<end>", len(self.text)
        raise SpecParseError(self.text, tok, pos, reason)

    def parse(self) -> Callable[[int], int]:
        fn = self.expr()
        if self.peek() is not None:
            self.fail("unexpected trailing token")
        return fn

    def expr(self):
        fn = self.term()
        while self.peek() in ("+", "-"):
            op, _ = self.next()
            rhs = self.term()
            lhs = fn
            if op == "+":
                fn = lambda n, a=lhs, b=rhs: a(n) + b(n)
            else:
                fn = lambda n, a=lhs, b=rhs: a(n) - b(n)
        return fn

    def term(self):
        fn = self.power()
        while True:
            nxt = self.peek()
            if nxt == "*":
                self.next()
                rhs = self.power()
            elif nxt is not None and (nxt.isdigit() or nxt in ("n", "(")):
                # implicit multiplication: 3n, 2(n+1), (n+1)(n+2)
                rhs = self.power()
            else:
                return fn
            lhs = fn
            fn = lambda n, a=lhs, b=rhs: a(n) * b(n)

    def power(self):
        base = self.postfix()
        if self.peek() in ("^", "**"):
            self.next()
            exp = self.power()  # right associative
            return lambda n, b=base, e=exp: _ipow(b(n), e(n), self.text)
        return base

    def postfix(self):
        fn = self.atom()
        while self.peek() == "!":
            self.next()
            inner = fn
            fn = lambda n, a=inner: _ifact(a(n), self.text)
        return fn

    def atom(self):
        nxt = self.peek()
        if nxt is None:
            self.fail("expected a value")
        if nxt == "-":
            self.next()
            inner = self.atom()
            return lambda n, a=inner: -a(n)
        if nxt == "(":
            self.next()
            fn = self.expr()
            if self.peek() != ")":
                self.fail("expected ')'")
            self.next()
            return fn
        tok, _ = self.next()
        if tok == "n":
            return lambda n: n
        if tok.isdigit():
            val = int(tok)
            return lambda n, v=val: v
        self.fail("expected integer, 'n' or '('")


def _ipow(base: int, exp: int, text: str) -> int:
    if exp < 0:
        raise SpecParseError(text, "^", 0, f"negative exponent {exp}")
    return base**exp

def _ifact(value: int, text: str) -> int:
    if value < 0:
        raise SpecParseError(text, "!", 0, f"factorial of negative value {value}")
    return math.factorial(value)


def parse_int_expr(text: str) -> IntExpr:
    return IntExpr(text, _Parser(text).parse())
