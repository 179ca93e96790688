"""Exception hierarchy shared by all modules."""


class CocycleLabError(Exception):
    """Base class for all library errors."""


class IndexBeyondSpec(CocycleLabError):
    """A partial-quotient index was requested beyond what the spec defines,
    or a refinement loop hit the configured depth cap."""


class PrecisionExhausted(CocycleLabError):
    """A comparison or rounding could not be decided at the available
    precision. `quantity` names the offending value."""

    def __init__(self, quantity: str, detail: str = ""):
        self.quantity = quantity
        msg = quantity if not detail else f"{quantity}: {detail}"
        super().__init__(msg)


class DegenerateParameter(CocycleLabError):
    """A construction parameter lies on a degenerate boundary (e.g. an
    interval endpoint at 0 or 1)."""


class InvalidPlan(CocycleLabError):
    """A digit plan violates its structural preconditions."""


class ShadowingGuard(CocycleLabError):
    """A simulation horizon exceeds what a truncated digit plan can
    faithfully shadow (n * tail_bound reached the smallest breakpoint gap)."""


class SpecParseError(CocycleLabError):
    """The alpha-spec mini-language failed to parse. Cites the offending
    token and its position."""

    def __init__(self, text: str, token: str, pos: int, reason: str):
        self.token = token
        self.pos = pos
        super().__init__(f"cannot parse {text!r}: bad token {token!r} at position {pos}: {reason}")
