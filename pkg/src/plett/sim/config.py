"""Scenario configuration and its JSON form."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from ..ettreg import ConfigError, PolicyConfig, PolicyKind
from .idm import LEAD_SCHEDULE, IdmParams

KINDS = ("single_lane", "multilane_critical", "multilane_noncritical", "synthetic_linear")

# process noise of the ACC vehicle: unit-variance acceleration through G = [Ts^2/2, Ts] at Ts = 0.01
W_ACC = ((2.5e-9, 5e-7), (5e-7, 1e-4))
W_OTHER_FACTOR = 10.0


def _scaled(m, k):
    return [[k * v for v in row] for row in m]


def default_properties(kind: str, idm: IdmParams, d_phi: float) -> list[str]:
    """Property texts of the ACC case study, instantiated for ``idm`` and ``d_phi``."""
    T = idm.T
    if kind == "single_lane":
        return [f"x_delta - {T}*v > {d_phi} @signals(v, x_delta) @id(phi_a)"]
    if kind.startswith("multilane"):
        return [f"x_delta - {T}*v > {d_phi} @signals(v, x_delta) @id(b1)"
                f" || (x_lof - {T}*v - {T}*vrel_lof > {d_phi} @signals(x_lof) @id(b2)"
                f" && x_lop - {T}*v > {d_phi} @signals(x_lop, v) @id(b3))"]
    if kind == "synthetic_linear":
        return ["x1 > 0 @signals(x1) @id(s1)"]
    raise ConfigError(f"unknown scenario kind {kind!r}")


def default_policy(kind: str) -> dict:
    if kind.startswith("multilane"):
        return {"kind": "CETT", "delta": {"v": 0.16, "x_delta": 0.5, "x_lop": 0.5, "x_lof": 2.0}}
    if kind == "synthetic_linear":
        # no lambdas: every atom gets the equal split
        return {"kind": "RHO_ETT_WC", "eps_rho": 1.0}
    return {"kind": "CETT", "delta": {"v": 0.16, "x_delta": 0.5}}


def default_fast_lane(kind: str) -> dict:
    """Fast-lane traffic: constant-speed vehicles, offsets relative to the ACC start."""
    if kind == "multilane_critical":
        # a quick vehicle passes early; the gap behind closes to just over the
        # follower headway around the time the lead brakes
        return {"speed": 33.0, "offsets": [-113.0, 150.0, -400.0, 10.0],
                "speeds": [33.0, 33.0, 33.0, 40.0]}
    if kind == "multilane_noncritical":
        return {"speed": 33.0, "offsets": [-200.0, 150.0, -450.0]}
    return {"speed": 33.0, "offsets": []}


def default_synthetic() -> dict:
    """Two independent scalar states with bounded noise and sinusoidal forcing."""
    return {"a": [0.98, 0.95], "b": [0.05, 0.08], "x0": [0.4, -0.3],
            "noise_bound": [0.02, 0.03], "q": [1e-4, 2e-4],
            "amplitude": [1.0, 0.8], "period": [60.0, 45.0]}


@dataclass
class ScenarioConfig:
    """Everything that determines a run apart from the seed."""

    kind: str = "single_lane"
    Ts: float = 0.01
    duration: float = 35.0
    q_acc: list = field(default_factory=lambda: [list(r) for r in W_ACC])
    q_other: list = field(default_factory=lambda: _scaled(W_ACC, W_OTHER_FACTOR))
    r: dict = field(default_factory=lambda: {"v": 0.1, "x_delta": 0.1, "x_lop": 0.1, "x_lof": 0.1})
    idm: IdmParams = field(default_factory=IdmParams)
    d_phi: float = 0.0
    lead_schedule: list = field(default_factory=lambda: [list(p) for p in LEAD_SCHEDULE])
    v_init: float = 30.0
    spacing_extra: float = 20.0
    wind_bias: float = 0.2
    other_input: str = "ego"
    policy: PolicyConfig = field(default_factory=lambda: PolicyConfig.from_dict(default_policy("single_lane")))
    properties: list | None = None
    eval_properties: list | None = None
    no_or: bool = False
    rho_max: float = 60.0
    z_sigma: float = 3.0
    fast_lane: dict | None = None
    lane_change: dict = field(default_factory=lambda: {"b1_below": 3.0, "b23_above": 1.0, "closing_above": 0.5})
    synthetic: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if isinstance(self.idm, Mapping):
            self.idm = IdmParams(**self.idm)
        if isinstance(self.policy, Mapping):
            self.policy = PolicyConfig.from_dict(self.policy)
        if not self.Ts > 0:
            raise ConfigError(f"Ts must be positive, got {self.Ts}")
        steps = self.duration / self.Ts
        if not self.duration > 0 or abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ConfigError(f"duration {self.duration} is not a whole number of samples of {self.Ts}")
        if not self.d_phi < self.idm.d0:
            raise ConfigError(f"d_phi ({self.d_phi}) must be smaller than d0 ({self.idm.d0})")
        if self.other_input not in ("none", "ego"):
            raise ConfigError(f"other_input must be 'none' or 'ego', got {self.other_input!r}")
        if not self.rho_max > 0:
            raise ConfigError("rho_max must be positive")
        if self.z_sigma < 0:
            raise ConfigError("z_sigma must be non-negative")
        if any(v < 0 for v in self.r.values()):
            raise ConfigError("measurement variances must be non-negative")
        if self.properties is None:
            self.properties = default_properties(self.kind, self.idm, self.d_phi)
        if self.kind.startswith("multilane") and self.fast_lane is None:
            self.fast_lane = default_fast_lane(self.kind)
        if self.kind == "synthetic_linear" and self.synthetic is None:
            self.synthetic = default_synthetic()

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.Ts))

    @classmethod
    def default(cls, kind: str, **overrides) -> "ScenarioConfig":
        """Defaults for ``kind`` with the matching baseline policy."""
        data = {"kind": kind, "policy": default_policy(kind)}
        if kind == "synthetic_linear":
            data.update(Ts=1.0, duration=500.0, z_sigma=0.0, rho_max=1.0)
        data.update(overrides)
        return cls(**data)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, IdmParams):
                v = v.to_dict()
            elif isinstance(v, PolicyConfig):
                v = v.to_dict()
            out[f.name] = copy.deepcopy(v)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**copy.deepcopy(dict(data)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "ScenarioConfig":
        data = self.to_dict()
        data.update(changes)
        return ScenarioConfig.from_dict(data)


def set_path(data: dict, path: str, value) -> None:
    """Assign ``value`` at a dotted ``path`` inside nested dicts, creating levels."""
    keys = path.split(".")
    cur = data
    for k in keys[:-1]:
        nxt = cur.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[k] = nxt
        cur = nxt
    cur[keys[-1]] = value


def with_params(config: ScenarioConfig, params: Mapping[str, Any]) -> ScenarioConfig:
    """Copy of ``config`` with dotted-path overrides such as ``policy.eps.v``."""
    data = config.to_dict()
    for path, value in params.items():
        set_path(data, path, value)
    return ScenarioConfig.from_dict(data)
