"""Scalar interval arithmetic with outward rounding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

from . import _rounding as R
from .exceptions import (
    DivisionByZeroInterval,
    IntervalOverflow,
    InvalidEndpoints,
    NegativeUncertainty,
)

__all__ = [
    "Interval", "IntervalDescriptors", "EMPTY", "make", "add", "sub", "mul",
    "div", "sqr", "descriptors", "from_uncertainty",
    "apply_monotone_increasing", "hull", "intersect", "contains", "subset",
    "mag", "relu",
]


def _checked(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise IntervalOverflow(f"endpoint left the finite range: [{lo}, {hi}]")
    return Interval(lo, hi)


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` of reals with finite float64 endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidEndpoints(f"non-finite endpoint in [{lo}, {hi}]")
        if lo > hi:
            raise InvalidEndpoints(f"lo > hi in [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x) -> "Interval":
        return cls(x, x)

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> float:
        return descriptors(self).mid

    @property
    def rad(self) -> float:
        return descriptors(self).rad

    @property
    def width(self) -> float:
        return descriptors(self).width

    def __contains__(self, x) -> bool:
        return contains(self, x)

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def to_json(self) -> str:
        return json.dumps([self.lo, self.hi])

    @classmethod
    def from_json(cls, s) -> "Interval":
        lo, hi = json.loads(s) if isinstance(s, str) else s
        return cls(lo, hi)


class _Empty:
    """Result of intersecting disjoint intervals."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _Empty()


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(x, x)


@dataclass(frozen=True)
class IntervalDescriptors:
    mid: float
    rad: float
    width: float
    beta: Optional[float]  # None when mid == 0 and rad > 0


def make(lo, hi) -> Interval:
    return Interval(lo, hi)


def add(a: Interval, b: Interval) -> Interval:
    return _checked(R.add_rd(a.lo, b.lo), R.add_ru(a.hi, b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    return _checked(R.sub_rd(a.lo, b.hi), R.sub_ru(a.hi, b.lo))


def mul(a: Interval, b: Interval) -> Interval:
    return _checked(*R.imul(a.lo, a.hi, b.lo, b.hi))


def div(a: Interval, b: Interval) -> Interval:
    if b.lo <= 0.0 <= b.hi:
        raise DivisionByZeroInterval(f"divisor {b} contains zero")
    return _checked(*R.idiv(a.lo, a.hi, b.lo, b.hi))


def sqr(a: Interval) -> Interval:
    """Square without the dependency blow-up of ``mul(a, a)``."""
    return _checked(*R.isqr(a.lo, a.hi))


def descriptors(a: Interval) -> IntervalDescriptors:
    """Midpoint, radius, width and relative uncertainty level of ``a``.

    The radius is rounded up so that ``[mid - rad, mid + rad]`` encloses
    ``a``.  ``beta`` is ``2 * rad / |mid|`` and is ``None`` when the
    midpoint is zero but the interval is not.
    """
    if a.is_degenerate:
        return IntervalDescriptors(a.lo, 0.0, 0.0, 0.0)
    mid = 0.5 * a.lo + 0.5 * a.hi
    rad = max(R.sub_ru(mid, a.lo), R.sub_ru(a.hi, mid))
    beta = None if mid == 0.0 else 2.0 * rad / abs(mid)
    return IntervalDescriptors(mid, rad, 2.0 * rad, beta)


def from_uncertainty(mid: float, beta: float) -> Interval:
    """Interval of relative total width ``beta`` around ``mid``.

    ``from_uncertainty(100, 0.10)`` is ``[95, 105]`` up to outward rounding.
    """
    if beta < 0 or not math.isfinite(beta):
        raise NegativeUncertainty(f"uncertainty level must be >= 0, got {beta}")
    if beta == 0:
        return Interval(mid, mid)
    half = 0.5 * beta
    factor = Interval(R.sub_rd(1.0, half), R.add_ru(1.0, half))
    return mul(Interval(mid, mid), factor)


def apply_monotone_increasing(f: Callable[[float], float], a: Interval,
                              ulps: int = 1) -> Interval:
    """Image of ``a`` under a nondecreasing ``f``.

    ``f`` is evaluated at the endpoints and each result is pushed ``ulps``
    floats outward to absorb the rounding error of ``f`` itself; pass
    ``ulps=0`` for functions computed exactly in floating point (ReLU,
    identity).
    """
    lo, hi = float(f(a.lo)), float(f(a.hi))
    for _ in range(ulps):
        lo, hi = R.next_down(lo), R.next_up(hi)
    return _checked(lo, hi)


def relu(a: Interval) -> Interval:
    return Interval(max(a.lo, 0.0), max(a.hi, 0.0))


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def intersect(a: Interval, b: Interval):
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        return EMPTY
    return Interval(lo, hi)


def contains(a: Interval, x) -> bool:
    return a.lo <= x <= a.hi


def subset(a: Interval, b: Interval) -> bool:
    """True when ``a`` is contained in ``b``."""
    return b.lo <= a.lo and a.hi <= b.hi


def mag(a: Interval) -> float:
    return max(abs(a.lo), abs(a.hi))
