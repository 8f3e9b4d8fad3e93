"""Car-following control and the lead-vehicle braking schedule."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

LEAD_SCHEDULE = ((0.0, 0.0), (20.0, -5.0), (25.0, 2.5), (35.0, 0.0))


class CollisionError(RuntimeError):
    """Bumper-to-bumper gap reached zero."""


@dataclass(frozen=True)
class IdmParams:
    d0: float = 2.7          # standstill gap [m]
    T: float = 2.0           # time headway [s]
    a_max: float = 2.5       # IDM acceleration parameter [m/s^2]
    b: float = 0.9           # comfortable deceleration [m/s^2]
    v0: float = 33.0         # desired speed [m/s]
    exponent: float = 4.0
    a_min: float = -5.0      # actuator limits [m/s^2]
    a_limit: float = 2.5
    variant: str = "iidm"    # "idm" or "iidm"

    def __post_init__(self):
        if self.variant not in ("idm", "iidm"):
            raise ValueError(f"unknown IDM variant {self.variant!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def desired_gap(v: float, dv: float, p: IdmParams) -> float:
    """``d0 + max(0, v T + v dv / (2 sqrt(a b)))``; ``dv`` is the approach rate."""
    return p.d0 + max(0.0, v * p.T + v * dv / (2.0 * math.sqrt(p.a_max * p.b)))


def idm_accel(v: float, dv: float, s: float, p: IdmParams) -> float:
    """Commanded acceleration for speed ``v``, approach rate ``dv = v - v_lead``
    and gap ``s``, clipped to ``[a_min, a_limit]``.

    ``variant="idm"`` is ``a (1 - (v/v0)^exp - (s*/s)^2)``. ``variant="iidm"``
    is the improved form whose equilibrium gap is exactly ``d0 + v T`` for any
    ``v < v0``.
    """
    if s <= 0:
        raise CollisionError(f"gap {s:.3f} m <= 0")
    v = max(v, 0.0)
    z = desired_gap(v, dv, p) / s
    if p.variant == "idm":
        a = p.a_max * (1.0 - (v / p.v0) ** p.exponent - z * z)
    elif v <= p.v0:
        a_free = p.a_max * (1.0 - (v / p.v0) ** p.exponent)
        if z >= 1.0:
            a = p.a_max * (1.0 - z * z)
        elif a_free > 0:
            a = a_free * (1.0 - z ** (2.0 * p.a_max / a_free))
        else:
            a = 0.0
    else:
        a_free = -p.b * (1.0 - (p.v0 / v) ** (p.a_max * p.exponent / p.b))
        a = a_free + p.a_max * (1.0 - z * z) if z >= 1.0 else a_free
    return min(max(a, p.a_min), p.a_limit)


def lead_profile(t: float, schedule=LEAD_SCHEDULE) -> float:
    """Piecewise-constant acceleration of the lead vehicle at time ``t``."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    accel = 0.0
    for start, a in schedule:
        if t >= start:
            accel = a
        else:
            break
    return accel
