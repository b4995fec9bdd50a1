"""Tropical and log semirings over log-domain costs.

Weights are plain floats: -log(probability) style costs where +inf is the
zero element and 0.0 is the one element.  The tropical semiring is the
decoding algebra (min, +); the log semiring is provided for LM sanity
checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

INF = math.inf


@dataclass(frozen=True)
class Semiring:
    name: str

    @property
    def zero(self) -> float:
        return INF

    @property
    def one(self) -> float:
        return 0.0

    def plus(self, a: float, b: float) -> float:
        raise NotImplementedError

    def times(self, a: float, b: float) -> float:
        if a == INF or b == INF:
            return INF
        return a + b

    def divide(self, a: float, b: float) -> float:
        """Right inverse of times: divide(times(a, b), b) == a for finite b."""
        if a == INF:
            return INF
        return a - b

    def approx_equal(self, a: float, b: float, tol: float = 1e-9) -> bool:
        if a == b:
            return True
        return abs(a - b) <= tol


@dataclass(frozen=True)
class _Tropical(Semiring):
    def plus(self, a: float, b: float) -> float:
        return a if a <= b else b


@dataclass(frozen=True)
class _Log(Semiring):
    def plus(self, a: float, b: float) -> float:
        # -log(e^-a + e^-b), computed stably.
        if a == INF:
            return b
        if b == INF:
            return a
        lo, hi = (a, b) if a <= b else (b, a)
        return lo - math.log1p(math.exp(lo - hi))


TROPICAL = _Tropical("tropical")
LOG = _Log("log")

_BY_NAME = {"tropical": TROPICAL, "log": LOG}


def semiring_by_name(name: str) -> Semiring:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown semiring: {name!r}") from None
