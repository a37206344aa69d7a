"""Exact-arithmetic admissibility rules for the regularity exponents.

All comparisons run on :class:`fractions.Fraction`; the admissibility
conditions are strict-inequality sensitive at the critical order
``alpha = 1 - theta``, so floats are rejected with a request for rationals.

Two facilities:

* :func:`mr_admissible` decides whether a tuple (theta, p, alpha, q) falls
  under one of the two maximal-regularity cases (small p with the fixed
  integrability ``1/(1-theta)``, or large p with ``q = p``).
* :func:`bootstrap_ladder` replays the integrability bootstrap: starting from
  ``u`` integrable to order p, the history operator improves the order through
  ``q <= p/(1 - p alpha)`` per rung while the forcing operator caps the ladder
  at ``q <= p/(1 - p(1-theta))`` (the forcing never improves), with endpoint
  exponents mapping to "every finite order".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

__all__ = [
    "as_fraction",
    "ExponentQuery",
    "Cap",
    "LadderRung",
    "PlanResult",
    "mr_admissible",
    "bootstrap_ladder",
]

Rational = Union[Fraction, int, str]

INF = math.inf


def as_fraction(value: Rational, name: str = "value") -> Fraction:
    """Coerce exact inputs to Fraction; floats are refused."""
    if isinstance(value, bool):
        raise TypeError(f"{name} must be rational, got a boolean")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{name}: cannot parse {value!r} as a rational") from exc
    if isinstance(value, float):
        raise TypeError(
            f"{name} must be exactly rational; pass a string like '3/5' or a Fraction "
            f"instead of the float {value!r}"
        )
    raise TypeError(f"{name} has unsupported type {type(value).__name__}")


@dataclass(frozen=True)
class ExponentQuery:
    """One admissibility question: scale theta, target p, regularity alpha."""

    theta: Fraction
    p: Fraction
    alpha: Fraction
    q: Fraction | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", as_fraction(self.theta, "theta"))
        object.__setattr__(self, "p", as_fraction(self.p, "p"))
        object.__setattr__(self, "alpha", as_fraction(self.alpha, "alpha"))
        if self.q is not None:
            object.__setattr__(self, "q", as_fraction(self.q, "q"))
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.q is not None and not self.q > 1:
            raise ValueError("q must exceed 1")


@dataclass(frozen=True, order=True)
class Cap:
    """An integrability ceiling; ``attainable=False`` means every finite order
    strictly below ``value`` (a weak-type endpoint)."""

    value: Fraction | float
    attainable: bool = True

    def describe(self) -> str:
        if self.value == INF:
            return "infinity" if self.attainable else "every finite order"
        return str(self.value)

    @staticmethod
    def minimum(a: "Cap", b: "Cap") -> "Cap":
        if a.value != b.value:
            return a if a.value < b.value else b
        return Cap(a.value, a.attainable and b.attainable)


@dataclass(frozen=True)
class LadderRung:
    start: Fraction
    history_cap: Cap
    forcing_cap: Cap
    result: Cap
    binding: str  # "history", "forcing" or "both"
    case: str


@dataclass
class PlanResult:
    admissible: bool
    rule: str
    required_q: Fraction | float | None
    alpha_threshold: Fraction
    ladder: list[LadderRung] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def enc(v):
            if v is None:
                return None
            if v == INF:
                return "inf"
            return str(v)

        return {
            "admissible": self.admissible,
            "rule": self.rule,
            "required_q": enc(self.required_q),
            "alpha_threshold": enc(self.alpha_threshold),
            "notes": list(self.notes),
            "ladder": [
                {
                    "start": enc(r.start),
                    "history_cap": r.history_cap.describe(),
                    "forcing_cap": r.forcing_cap.describe(),
                    "result": r.result.describe(),
                    "binding": r.binding,
                    "case": r.case,
                }
                for r in self.ladder
            ],
        }


def _split_exponent(theta: Fraction) -> Fraction | float:
    """The pivot ``1/(1-theta)`` separating the two cases."""
    if theta == 1:
        return INF
    return 1 / (1 - theta)


def mr_admissible(query: ExponentQuery) -> PlanResult:
    """Decide the maximal-regularity case for a (theta, p, alpha, q) tuple.

    Small p (below ``1/(1-theta)``) requires the fractional-regularity
    integrability ``q = 1/(1-theta)``; from the pivot upward ``q = p``.  In
    both cases the regularity order must exceed ``1 - theta`` strictly.
    """
    theta, p, alpha = query.theta, query.p, query.alpha
    threshold = 1 - theta
    split = _split_exponent(theta)
    notes: list[str] = []

    if theta == 1:
        rule = "constant-domain-endpoint"
        required_q: Fraction | float = INF
        notes.append(
            "theta = 1 degenerates the pivot 1/(1-theta); q = infinity marks the "
            "Hoelder-scale endpoint and is flagged rather than decided"
        )
    elif p < split:
        rule = "p-below-pivot"
        required_q = split
    else:
        rule = "p-at-or-above-pivot"
        required_q = p

    admissible = alpha > threshold
    if not admissible:
        if alpha == threshold:
            notes.append(
                "critical order alpha = 1 - theta is excluded (strict inequality)"
            )
        else:
            notes.append("regularity order below the critical threshold 1 - theta")
    if query.q is not None and query.q != required_q:
        admissible = False
        notes.append(f"this case requires q = {required_q}, got q = {query.q}")
    return PlanResult(admissible, rule, required_q, threshold, notes=notes)


def _history_cap(p: Fraction | float, alpha: Fraction) -> Cap:
    """One application of the history operator: L^p -> L^q."""
    if p == INF:
        return Cap(INF)
    reciprocal_gain = Fraction(1, 1) / p - alpha  # 1/q after one rung
    if reciprocal_gain > 0:
        return Cap(p / (1 - p * alpha))
    if reciprocal_gain == 0:
        return Cap(INF, attainable=False)  # endpoint p = 1/alpha
    return Cap(INF)


def _forcing_cap(p: Fraction, theta: Fraction) -> Cap:
    """The fixed ceiling contributed by the forcing operator."""
    if theta == 1:
        return Cap(INF, attainable=True)
    split = _split_exponent(theta)
    if p < split:
        return Cap(p / (1 - p * (1 - theta)))
    if p == split:
        return Cap(INF, attainable=False)
    return Cap(INF)


def _case_label(p: Fraction | float, split: Fraction | float) -> str:
    if p == INF or p > split:
        return "p-above-pivot"
    if p == split:
        return "p-at-pivot"
    return "p-below-pivot"


def bootstrap_ladder(
    theta: Rational, p_start: Rational, alpha: Rational, max_rungs: int = 10_000
) -> PlanResult:
    """Replay the integrability bootstrap from a starting order ``p_start``.

    Each rung takes the joint minimum of the history cap (which improves with
    the current order) and the forcing ceiling (fixed, since the data never
    improves), labelling which operator binds.  The ladder terminates at the
    forcing ceiling or at infinity; for theta = 1 the kernel order is marginal
    and the formal branch ``q = infinity`` is flagged instead of derived.
    """
    theta = as_fraction(theta, "theta")
    alpha = as_fraction(alpha, "alpha")
    p0 = as_fraction(p_start, "p_start")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if not p0 > 1:
        raise ValueError("p_start must exceed 1")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")

    split = _split_exponent(theta)
    notes: list[str] = []
    if theta == 1:
        notes.append(
            "theta = 1: kernel order -1 is marginal; returning the formal branch "
            "q = infinity, flagged"
        )
        result = PlanResult(True, _case_label(p0, split), INF, 1 - theta, notes=notes)
        result.ladder.append(
            LadderRung(p0, Cap(INF), Cap(INF), Cap(INF), "both", "p-below-pivot")
        )
        return result

    forcing = _forcing_cap(p0, theta)
    ladder: list[LadderRung] = []
    current: Cap = Cap(p0)
    for _ in range(max_rungs):
        if current.value == INF:
            break
        history = _history_cap(current.value, alpha)
        nxt = Cap.minimum(history, forcing)
        if history == forcing:
            binding = "both"
        elif nxt == history:
            binding = "history"
        else:
            binding = "forcing"
        ladder.append(
            LadderRung(current.value, history, forcing, nxt, binding, _case_label(current.value, split))
        )
        if nxt.value == current.value:
            break
        current = nxt
        if current == forcing:
            break
    else:
        raise AssertionError("ladder failed to terminate; this cannot happen for theta > 0")

    final = ladder[-1].result if ladder else Cap(p0)
    if not final.attainable:
        notes.append("endpoint rung: every finite order, supremum not attained")
    notes.append(f"ladder terminated after {len(ladder)} rung(s)")
    return PlanResult(
        True,
        _case_label(p0, split),
        final.value,
        1 - theta,
        ladder=ladder,
        notes=notes,
    )
