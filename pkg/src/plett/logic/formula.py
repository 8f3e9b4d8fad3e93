"""Abstract syntax for propositional properties over affine atoms."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union


class Comparator(enum.Enum):
    GT = ">"
    LT = "<"

    def flipped(self) -> "Comparator":
        return Comparator.LT if self is Comparator.GT else Comparator.GT


@dataclass(frozen=True)
class LinearAtom:
    """``sum(coef_i * x_i) + offset  (> | <)  threshold``.

    ``coefficients`` is a tuple of ``(state, coef)`` pairs in source order.
    ``signals`` are the sensor channels whose thresholds this atom regulates;
    a signal named like a state measures that state directly.
    """

    coefficients: tuple[tuple[str, float], ...]
    threshold: float
    comparator: Comparator = Comparator.GT
    offset: float = 0.0
    rho_max: float = 1.0
    signals: frozenset[str] = field(default_factory=frozenset)
    name: str | None = None

    def __post_init__(self):
        if not self.rho_max > 0:
            raise ValueError(f"rho_max must be positive, got {self.rho_max}")
        states = [s for s, _ in self.coefficients]
        if len(set(states)) != len(states):
            raise ValueError(f"duplicate state in atom coefficients: {states}")

    @property
    def coef(self) -> dict[str, float]:
        return dict(self.coefficients)

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.coefficients)

    def negated(self) -> "LinearAtom":
        return LinearAtom(
            self.coefficients,
            self.threshold,
            self.comparator.flipped(),
            self.offset,
            self.rho_max,
            self.signals,
            self.name,
        )


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


Formula = Union[LinearAtom, Not, And, Or]


def to_nnf(phi: Formula) -> Formula:
    """Push negations into the atoms (flipping their comparator)."""
    return _nnf(phi, False)


def _nnf(phi, negate):
    if isinstance(phi, LinearAtom):
        return phi.negated() if negate else phi
    if isinstance(phi, Not):
        return _nnf(phi.child, not negate)
    left, right = _nnf(phi.left, negate), _nnf(phi.right, negate)
    if isinstance(phi, And):
        return Or(left, right) if negate else And(left, right)
    if isinstance(phi, Or):
        return And(left, right) if negate else Or(left, right)
    raise TypeError(f"not a formula node: {phi!r}")


def atoms(phi: Formula) -> Iterator[LinearAtom]:
    """Atoms in left-to-right order."""
    if isinstance(phi, LinearAtom):
        yield phi
    elif isinstance(phi, Not):
        yield from atoms(phi.child)
    else:
        yield from atoms(phi.left)
        yield from atoms(phi.right)


def states_of(phi: Formula) -> set[str]:
    return {s for a in atoms(phi) for s in a.states}


def signals_of(phi: Formula) -> set[str]:
    """Union of the signal bindings of all atoms."""
    out: set[str] = set()
    for a in atoms(phi):
        out |= a.signals
    return out


def with_names(phi: Formula, prefix: str = "a") -> Formula:
    """Give unnamed atoms positional names ``a0, a1, ...``."""
    counter = iter(range(10**9))

    def go(node):
        if isinstance(node, LinearAtom):
            i = next(counter)
            if node.name is not None:
                return node
            return LinearAtom(node.coefficients, node.threshold, node.comparator,
                              node.offset, node.rho_max, node.signals, f"{prefix}{i}")
        if isinstance(node, Not):
            return Not(go(node.child))
        return type(node)(go(node.left), go(node.right))

    return go(phi)


def replace_or_with_and(phi: Formula) -> Formula:
    """Same property with every disjunction turned into a conjunction."""
    if isinstance(phi, LinearAtom):
        return phi
    if isinstance(phi, Not):
        return Not(replace_or_with_and(phi.child))
    cls = And if isinstance(phi, (And, Or)) else type(phi)
    return cls(replace_or_with_and(phi.left), replace_or_with_and(phi.right))


def _num(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_atom(atom: LinearAtom) -> str:
    parts: list[str] = []
    for i, (state, c) in enumerate(atom.coefficients):
        sign = "-" if c < 0 else "+"
        mag = _num(abs(c))
        term = state if mag == "1" else f"{mag}*{state}"
        if i == 0:
            parts.append(term if sign == "+" else f"-{term}")
        else:
            parts.append(f" {sign} {term}")
    if not parts:
        parts.append("0")
    if atom.offset:
        sign = "-" if atom.offset < 0 else "+"
        parts.append(f" {sign} {_num(abs(atom.offset))}")
    text = "".join(parts) + f" {atom.comparator.value} {_num(atom.threshold)}"
    text += f" @rhomax({_num(atom.rho_max)})"
    text += f" @signals({', '.join(sorted(atom.signals))})"
    if atom.name is not None:
        text += f" @id({atom.name})"
    return text


def format_formula(phi: Formula) -> str:
    """Render ``phi`` in the property grammar; parsing the result gives back ``phi``."""
    if isinstance(phi, LinearAtom):
        return format_atom(phi)
    if isinstance(phi, Not):
        return f"!({format_formula(phi.child)})"
    op = "&&" if isinstance(phi, And) else "||"
    return f"({format_formula(phi.left)}) {op} ({format_formula(phi.right)})"
