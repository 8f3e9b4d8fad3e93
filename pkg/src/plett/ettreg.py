"""Event-trigger threshold (ETT) regulation policies.

An ETT assignment maps signal names to thresholds ``delta >= 0``. A signal
that is absent from an assignment (or mapped to ``inf``) is unconstrained.

Policies:

* ``TT``: every sample is transmitted.
* ``CETT``: constant per-signal thresholds.
* ``RHO_ETT``: thresholds proportional to the estimated robustness of each
  atom, relaxed through disjunctions by normalized robustness.
* ``RHO_ETT_WC``: as ``RHO_ETT`` but driven by the lower bound of the
  predicted robustness interval, with per-signal gains synthesized so that
  the monitored and true robustness always agree in sign.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .logic.formula import And, Formula, LinearAtom, Or, atoms, signals_of
from .logic.robustness import (StateIntervalVector, StateVector, atom_robustness,
                               atom_robustness_interval)

EttAssignment = dict[str, float]
INF = math.inf
LAMBDA_TOL = 1e-9


class ConfigError(ValueError):
    """Policy parameters violate their constraints."""


class PolicyKind(str, enum.Enum):
    TT = "TT"
    CETT = "CETT"
    RHO_ETT = "RHO_ETT"
    RHO_ETT_WC = "RHO_ETT_WC"


def _per_atom(table) -> dict[str, dict[str, float]]:
    # {"v": 1.0} is shorthand for {"*": {"v": 1.0}}
    if not table:
        return {}
    if all(isinstance(v, (int, float)) for v in table.values()):
        return {"*": {k: float(v) for k, v in table.items()}}
    return {a: {k: float(v) for k, v in sig.items()} for a, sig in table.items()}


@dataclass
class PolicyConfig:
    """Parameters of one ETT policy.

    ``eps`` and ``lambdas`` are keyed by atom name (``"*"`` matches any atom)
    and then by signal. ``eps_rho`` is a float or a per-atom mapping. For
    ``RHO_ETT_WC`` the gains come from ``lambdas``/``eps_rho`` when
    ``lambdas`` is given, otherwise from ``eps`` directly, and with neither
    from the equal split ``lambda_i = n`` and ``eps_rho``.
    """

    kind: PolicyKind
    eps: dict = field(default_factory=dict)
    delta: dict = field(default_factory=dict)
    lambdas: dict = field(default_factory=dict)
    eps_rho: float | dict = 1.0
    eta: float = 0.0

    def __post_init__(self):
        self.kind = PolicyKind(self.kind)
        self.eps = _per_atom(self.eps)
        self.lambdas = _per_atom(self.lambdas)
        self.delta = {k: float(v) for k, v in self.delta.items()}
        if self.eta < 0:
            raise ConfigError(f"eta must be non-negative, got {self.eta}")
        if self.kind is PolicyKind.CETT:
            bad = {k: v for k, v in self.delta.items() if not v >= 0}
            if bad:
                raise ConfigError(f"constant thresholds must be non-negative: {bad}")
        for table in self.eps.values():
            bad = {k: v for k, v in table.items() if not v > 0}
            if bad:
                raise ConfigError(f"eps must be positive: {bad}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolicyConfig":
        known = {"kind", "eps", "delta", "lambdas", "eps_rho", "eta"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown policy fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        def flat(table):
            # inverse of the "*" shorthand, so dotted paths like policy.eps.v work
            return dict(table["*"]) if set(table) == {"*"} else {a: dict(t) for a, t in table.items()}
        eps_rho = dict(self.eps_rho) if isinstance(self.eps_rho, Mapping) else self.eps_rho
        return {"kind": self.kind.value, "eps": flat(self.eps), "delta": dict(self.delta),
                "lambdas": flat(self.lambdas), "eps_rho": eps_rho, "eta": self.eta}

    def _lookup(self, table, atom: LinearAtom, signal: str, what: str) -> float:
        for key in (atom.name, "*"):
            if key in table and signal in table[key]:
                return table[key][signal]
        raise ConfigError(f"no {what} for signal {signal!r} of atom {atom.name!r}")

    def eps_for(self, atom: LinearAtom, signal: str) -> float:
        return self._lookup(self.eps, atom, signal, "eps")

    def lambdas_for(self, atom: LinearAtom) -> dict[str, float]:
        return {s: self._lookup(self.lambdas, atom, s, "lambda") for s in atom.signals}

    def eps_rho_for(self, atom: LinearAtom) -> float:
        if isinstance(self.eps_rho, Mapping):
            for key in (atom.name, "*"):
                if key in self.eps_rho:
                    return float(self.eps_rho[key])
            raise ConfigError(f"no eps_rho for atom {atom.name!r}")
        return float(self.eps_rho)

    def wc_eps(self, atom: LinearAtom) -> dict[str, float]:
        """Per-signal gains used by the worst-case policy for ``atom``: synthesized
        from ``lambdas`` if given, else ``eps`` directly, else the equal split."""
        if self.lambdas:
            return worst_case_gains(atom, self.lambdas_for(atom), self.eps_rho_for(atom))
        if self.eps:
            return {s: self.eps_for(atom, s) for s in atom.signals}
        return worst_case_gains(atom, default_lambdas(atom), self.eps_rho_for(atom))


def combine_min(assignments: Iterable[Mapping[str, float]]) -> EttAssignment:
    """Per-signal minimum; a signal missing from an assignment counts as ``inf``."""
    assignments = list(assignments)
    if not assignments:
        raise ValueError("combine_min needs at least one assignment")
    out: EttAssignment = {}
    for a in assignments:
        for s, d in a.items():
            cur = out.get(s)
            if cur is None or d < cur:
                out[s] = d
    return out


def cett(config: PolicyConfig) -> EttAssignment:
    if config.kind is not PolicyKind.CETT:
        raise ConfigError(f"cett() needs a CETT policy, got {config.kind.value}")
    return dict(config.delta)


def _rho_proportional(rho: float, eps: float) -> float:
    return max(rho, 0.0) / eps


def rho_ett_atom(atom: LinearAtom, x: StateVector, eps: Mapping[str, float]) -> EttAssignment:
    """Thresholds proportional to the clamped robustness of a single atom."""
    rho = atom_robustness(atom, x)
    out = {}
    for s in atom.signals:
        if s not in eps:
            raise ConfigError(f"no eps for signal {s!r} of atom {atom.name!r}")
        out[s] = _rho_proportional(rho, eps[s])
    return out


def _delta_in(atom: LinearAtom, rho: float, beta: float, eps_of) -> EttAssignment:
    zeta = max(rho, 0.0) / atom.rho_max
    relax = max(beta - zeta, 0.0) * atom.rho_max
    out = {}
    for s in atom.signals:
        e = eps_of(atom, s)
        out[s] = max(rho, 0.0) / e + relax / e
    return out


def refine_pair(phi: Formula, x: StateVector, cfg: PolicyConfig) -> EttAssignment:
    """Refinement for a conjunction or disjunction of exactly two atoms."""
    if not isinstance(phi, (And, Or)) or not (
            isinstance(phi.left, LinearAtom) and isinstance(phi.right, LinearAtom)):
        raise ValueError("refine_pair expects an And/Or of two atoms")
    a1, a2 = phi.left, phi.right
    r1, r2 = atom_robustness(a1, x), atom_robustness(a2, x)
    if isinstance(phi, Or):
        beta = max(max(r1, 0.0) / a1.rho_max, max(r2, 0.0) / a2.rho_max)
    else:
        beta = 0.0
    return combine_min([_delta_in(a1, r1, beta, cfg.eps_for),
                        _delta_in(a2, r2, beta, cfg.eps_for)])


def _refine_tree(phi: Formula, rho_of: Callable[[LinearAtom], float],
                 eps_of: Callable[[LinearAtom, str], float]) -> EttAssignment:
    # bottom-up normalized robustness of every node, then top-down beta propagation
    zeta: dict[int, float] = {}
    rho: dict[int, float] = {}

    def up(node) -> float:
        if isinstance(node, LinearAtom):
            r = rho_of(node)
            rho[id(node)] = r
            z = max(r, 0.0) / node.rho_max
        elif isinstance(node, And):
            z = min(up(node.left), up(node.right))
        elif isinstance(node, Or):
            z = max(up(node.left), up(node.right))
        else:
            raise TypeError(f"expected a negation-normal-form node, got {node!r}")
        zeta[id(node)] = z
        return z

    def down(node, beta) -> EttAssignment:
        if isinstance(node, LinearAtom):
            return _delta_in(node, rho[id(node)], beta, eps_of)
        if isinstance(node, And):
            return combine_min([down(node.left, beta), down(node.right, beta)])
        return combine_min([down(node.left, max(beta, zeta[id(node.right)])),
                            down(node.right, max(beta, zeta[id(node.left)]))])

    return down(phi, up(phi))


def refine_arbitrary(phi: Formula, x: StateVector, cfg: PolicyConfig) -> EttAssignment:
    """Robustness-proportional thresholds for an arbitrary property."""
    return _refine_tree(phi, lambda a: atom_robustness(a, x), cfg.eps_for)


def worst_case_gains(atom: LinearAtom, lambdas: Mapping[str, float],
                     eps_rho: float) -> dict[str, float]:
    """Gains ``2 |coef| * lambda * eps_rho`` that make the next-step robustness
    interval no wider than ``max(lower bound, 0) / eps_rho``."""
    if not eps_rho >= 1:
        raise ConfigError(f"eps_rho must be >= 1, got {eps_rho}")
    coef = atom.coef
    measured = {s for s, c in coef.items() if c != 0}
    if measured - set(atom.signals):
        raise ConfigError(
            f"atom {atom.name!r}: states {sorted(measured - set(atom.signals))} "
            "are not directly measured by a bound signal")
    if set(atom.signals) - measured:
        raise ConfigError(
            f"atom {atom.name!r}: signals {sorted(set(atom.signals) - measured)} "
            "do not measure a state of the atom")
    missing = set(atom.signals) - set(lambdas)
    if missing:
        raise ConfigError(f"atom {atom.name!r}: no lambda for {sorted(missing)}")
    if any(not lambdas[s] > 0 for s in atom.signals):
        raise ConfigError(f"lambdas must be positive: {dict(lambdas)}")
    total = sum(1.0 / lambdas[s] for s in atom.signals)
    if abs(total - 1.0) > LAMBDA_TOL:
        raise ConfigError(f"atom {atom.name!r}: sum of 1/lambda is {total}, expected 1")
    return {s: 2.0 * abs(coef[s]) * lambdas[s] * eps_rho for s in atom.signals}


def default_lambdas(atom: LinearAtom) -> dict[str, float]:
    """Equal split: every bound signal gets ``lambda = number of signals``."""
    n = len(atom.signals)
    return {s: float(n) for s in atom.signals}


def split_from_gains(atom: LinearAtom, eps: Mapping[str, float]) -> tuple[dict[str, float], float]:
    """Recover ``(lambdas, eps_rho)`` from direct gains; inverse of :func:`worst_case_gains`.

    The result satisfies the gain constraints only if the returned ``eps_rho``
    is at least 1.
    """
    coef = atom.coef
    eps_rho = 1.0 / sum(2.0 * abs(coef[s]) / eps[s] for s in atom.signals)
    lambdas = {s: eps[s] / (2.0 * abs(coef[s]) * eps_rho) for s in atom.signals}
    return lambdas, eps_rho


# interface names for the gain synthesis
theorem1_epsilon = worst_case_gains
theorem1_from_epsilon = split_from_gains


def wc_ett_atom(atom: LinearAtom, dx_pred: StateIntervalVector,
                lambdas: Mapping[str, float] | None = None, eps_rho: float = 1.0,
                *, eps: Mapping[str, float] | None = None) -> EttAssignment:
    """Thresholds from the predicted worst-case robustness of one atom."""
    if eps is None:
        eps = worst_case_gains(atom, lambdas if lambdas is not None else default_lambdas(atom),
                               eps_rho)
    lower = atom_robustness_interval(atom, dx_pred).lo
    return {s: _rho_proportional(lower, eps[s]) for s in atom.signals}


def wc_gains(phi: Formula, cfg: PolicyConfig) -> dict[int, dict[str, float]]:
    """Worst-case gains of every atom of ``phi``, keyed by atom identity."""
    return {id(a): cfg.wc_eps(a) for a in atoms(phi)}


def wc_refine_arbitrary(phi: Formula, dx_pred: StateIntervalVector, cfg: PolicyConfig,
                        gains: Mapping[int, Mapping[str, float]] | None = None) -> EttAssignment:
    """Worst-case refinement: lower robustness bounds and synthesized gains.

    ``gains`` may carry a precomputed :func:`wc_gains` table for ``phi``.
    """
    if gains is None:
        gains = wc_gains(phi, cfg)
    return _refine_tree(phi, lambda a: atom_robustness_interval(a, dx_pred).lo,
                        lambda a, s: gains[id(a)][s])


def regulate(cfg: PolicyConfig, properties: Iterable[Formula], x: StateVector,
             dx_pred: StateIntervalVector | None = None,
             gains: Mapping[int, Mapping[int, Mapping[str, float]]] | None = None) -> EttAssignment:
    """Thresholds for every signal bound by ``properties`` under ``cfg``.

    ``gains`` optionally maps ``id(phi)`` to a :func:`wc_gains` table.
    """
    properties = list(properties)
    if cfg.kind is PolicyKind.TT:
        return {s: 0.0 for phi in properties for s in signals_of(phi)}
    if cfg.kind is PolicyKind.CETT:
        return cett(cfg)
    if cfg.kind is PolicyKind.RHO_ETT:
        return combine_min(refine_arbitrary(phi, x, cfg) for phi in properties)
    if dx_pred is None:
        raise ValueError("the worst-case policy needs a predicted state interval")
    gains = gains or {}
    return combine_min(wc_refine_arbitrary(phi, dx_pred, cfg, gains.get(id(phi)))
                       for phi in properties)


def validate(cfg: PolicyConfig, properties: Iterable[Formula]) -> None:
    """Raise :class:`ConfigError` if ``cfg`` lacks parameters for ``properties``."""
    for phi in properties:
        for a in atoms(phi):
            if cfg.kind is PolicyKind.RHO_ETT:
                for s in a.signals:
                    cfg.eps_for(a, s)
            elif cfg.kind is PolicyKind.RHO_ETT_WC:
                cfg.wc_eps(a)
        if cfg.kind is PolicyKind.CETT:
            missing = signals_of(phi) - set(cfg.delta)
            if missing:
                raise ConfigError(f"no constant threshold for signals {sorted(missing)}")
