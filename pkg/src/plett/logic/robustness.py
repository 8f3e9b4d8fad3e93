"""Quantitative semantics: point, interval and normalized robustness."""

from __future__ import annotations

from typing import Mapping

from ..interval import Interval, imax, imin
from .formula import And, Comparator, Formula, LinearAtom, Not, Or

StateVector = Mapping[str, float]
StateIntervalVector = Mapping[str, Interval]


def _lookup(x, state):
    try:
        return x[state]
    except KeyError:
        raise KeyError(f"state {state!r} missing from state vector") from None


def affine_value(atom: LinearAtom, x: StateVector) -> float:
    return sum(c * _lookup(x, s) for s, c in atom.coefficients) + atom.offset


def atom_robustness(atom: LinearAtom, x: StateVector) -> float:
    p = affine_value(atom, x)
    if atom.comparator is Comparator.GT:
        return p - atom.threshold
    return atom.threshold - p


def robustness(phi: Formula, x: StateVector) -> float:
    if isinstance(phi, LinearAtom):
        return atom_robustness(phi, x)
    if isinstance(phi, And):
        return min(robustness(phi.left, x), robustness(phi.right, x))
    if isinstance(phi, Or):
        return max(robustness(phi.left, x), robustness(phi.right, x))
    if isinstance(phi, Not):
        return -robustness(phi.child, x)
    raise TypeError(f"not a formula node: {phi!r}")


def affine_interval(atom: LinearAtom, dx: StateIntervalVector) -> Interval:
    """Interval image of the affine part, i.e. ``sum(coef * X) + offset``."""
    lo = hi = atom.offset
    for s, c in atom.coefficients:
        box = _lookup(dx, s)
        # scale() without the allocation; a negative coefficient swaps bounds
        if c >= 0:
            lo += c * box.lo
            hi += c * box.hi
        else:
            lo += c * box.hi
            hi += c * box.lo
    return Interval(lo, hi)


def atom_robustness_interval(atom: LinearAtom, dx: StateIntervalVector) -> Interval:
    p = affine_interval(atom, dx)
    if atom.comparator is Comparator.GT:
        return Interval(p.lo - atom.threshold, p.hi - atom.threshold)
    return Interval(atom.threshold - p.hi, atom.threshold - p.lo)


def robustness_interval(phi: Formula, dx: StateIntervalVector) -> Interval:
    """Bounds on the robustness of ``phi`` over every state in the box ``dx``."""
    if isinstance(phi, LinearAtom):
        return atom_robustness_interval(phi, dx)
    if isinstance(phi, And):
        return imin(robustness_interval(phi.left, dx), robustness_interval(phi.right, dx))
    if isinstance(phi, Or):
        return imax(robustness_interval(phi.left, dx), robustness_interval(phi.right, dx))
    if isinstance(phi, Not):
        return -robustness_interval(phi.child, dx)
    raise TypeError(f"not a formula node: {phi!r}")


def normalized_robustness(atom: LinearAtom, x: StateVector) -> float:
    """``max(rho, 0) / rho_max``. Not clamped above."""
    return max(atom_robustness(atom, x), 0.0) / atom.rho_max


def normalized_robustness_rec(phi: Formula, x: StateVector) -> float:
    if isinstance(phi, LinearAtom):
        return normalized_robustness(phi, x)
    if isinstance(phi, And):
        return min(normalized_robustness_rec(phi.left, x), normalized_robustness_rec(phi.right, x))
    if isinstance(phi, Or):
        return max(normalized_robustness_rec(phi.left, x), normalized_robustness_rec(phi.right, x))
    raise TypeError(f"expected a negation-normal-form node, got {phi!r}")


def wc_normalized_robustness(atom: LinearAtom, dx: StateIntervalVector) -> float:
    """Normalized robustness of the worst state in the box."""
    return max(atom_robustness_interval(atom, dx).lo, 0.0) / atom.rho_max


def wc_normalized_robustness_rec(phi: Formula, dx: StateIntervalVector) -> float:
    if isinstance(phi, LinearAtom):
        return wc_normalized_robustness(phi, dx)
    if isinstance(phi, And):
        return min(wc_normalized_robustness_rec(phi.left, dx),
                   wc_normalized_robustness_rec(phi.right, dx))
    if isinstance(phi, Or):
        return max(wc_normalized_robustness_rec(phi.left, dx),
                   wc_normalized_robustness_rec(phi.right, dx))
    raise TypeError(f"expected a negation-normal-form node, got {phi!r}")
