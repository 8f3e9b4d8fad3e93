"""Closed real intervals and the arithmetic needed to bound robustness.

Intervals are finite except that ``hi`` may be ``+inf`` (an unconstrained
threshold). No outward rounding is performed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["Interval", "make", "add", "sub", "mul", "scale", "width", "point"]


def _prod(a: float, b: float) -> float:
    # 0 * inf is taken as 0, the usual interval convention
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval bounds must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        if isinstance(other, Interval):
            return mul(self, other)
        return scale(other, self)

    __rmul__ = __mul__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


def _coerce(value) -> Interval:
    if isinstance(value, Interval):
        return value
    return Interval(float(value), float(value))


def point(value: float) -> Interval:
    """Degenerate interval ``[value, value]``."""
    return Interval(value, value)


def make(center: float, radius: float) -> Interval:
    """The interval ``[center - radius, center + radius]``."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    return Interval(center - radius, center + radius)


def add(x: Interval, y: Interval) -> Interval:
    return Interval(x.lo + y.lo, x.hi + y.hi)


def sub(x: Interval, y: Interval) -> Interval:
    return Interval(x.lo - y.hi, x.hi - y.lo)


def mul(x: Interval, y: Interval) -> Interval:
    s = (_prod(x.lo, y.lo), _prod(x.lo, y.hi), _prod(x.hi, y.lo), _prod(x.hi, y.hi))
    return Interval(min(s), max(s))


def scale(a: float, x: Interval) -> Interval:
    """``[a, a] * x``; a negative factor swaps the bounds."""
    if a >= 0:
        return Interval(_prod(a, x.lo), _prod(a, x.hi))
    return Interval(_prod(a, x.hi), _prod(a, x.lo))


def width(x: Interval) -> float:
    return x.hi - x.lo


def imin(x: Interval, y: Interval) -> Interval:
    """Image of ``min`` over the box ``x * y`` (bounds taken pointwise)."""
    return Interval(min(x.lo, y.lo), min(x.hi, y.hi))


def imax(x: Interval, y: Interval) -> Interval:
    return Interval(max(x.lo, y.lo), max(x.hi, y.hi))
