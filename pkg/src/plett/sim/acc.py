"""Closed-loop adaptive cruise control (ACC) world.

The ACC vehicle drives in the slow lane behind a lead vehicle that follows a
braking schedule. Its own speed sensor and the distance sensors report to a
remote estimator over event-triggered channels; the estimator's output drives
both the robustness monitor (which sets the next thresholds) and the IDM
controller.

In the multilane scenarios a second lane carries IDM-controlled traffic and
the ACC may perform one kinematic lane change. Distance sensors are bound to
roles (own-lane preceding, other-lane preceding, other-lane following) and are
re-targeted every step from the true geometry. The estimator keeps one
relative-motion filter per surrounding vehicle, so a re-targeted sensor simply
updates a different filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..estimator import EstimatorState, LtiModel, TwoStateFilter
from ..ettreg import PolicyKind, regulate, validate, wc_gains
from ..interval import Interval
from ..logic import atoms, parse, replace_or_with_and, robustness
from .config import ScenarioConfig
from .idm import CollisionError, IdmParams, idm_accel, lead_profile
from .result import SimResult

SINGLE_SENSORS = ("v", "x_delta")
MULTI_SENSORS = ("v", "x_delta", "x_lop", "x_lof")
ROLE_STATES = {"x_delta": ("x_delta", "vrel_delta"), "x_lop": ("x_lop", "vrel_lop"),
               "x_lof": ("x_lof", "vrel_lof")}
SENSOR_RANGE = 250.0
SLOW, FAST = 0, 1


@dataclass
class _Vehicle:
    name: str
    lane: int
    pos: float
    speed: float
    schedule: tuple | None = None    # piecewise acceleration; None means IDM traffic
    v0: float = 0.0
    accel: float = 0.0


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; every run draws from its own seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _matrices(Ts: float):
    A = np.array([[1.0, Ts], [0.0, 1.0]])
    B = np.array([[Ts * Ts / 2.0], [Ts]])
    return A, B


def _parse_properties(cfg: ScenarioConfig, texts, states):
    return [parse(t, states=states, rho_max=cfg.rho_max) for t in texts]


class AccWorld:
    """One ACC run; call :meth:`run` once."""

    def __init__(self, cfg: ScenarioConfig, seed: int):
        if cfg.kind == "synthetic_linear":
            raise ValueError("use the synthetic scenario runner for synthetic_linear")
        self.cfg = cfg
        self.seed = int(seed)
        self.multi = cfg.kind.startswith("multilane")
        self.sensors = MULTI_SENSORS if self.multi else SINGLE_SENSORS
        state_names = ["v"] + [s for r in self.sensors[1:] for s in ROLE_STATES[r]]
        self.state_names = tuple(state_names)

        props = _parse_properties(cfg, cfg.properties, state_names)
        eval_texts = cfg.eval_properties if cfg.eval_properties is not None else cfg.properties
        self.eval_props = _parse_properties(cfg, eval_texts, state_names)
        if cfg.no_or:
            props = [replace_or_with_and(p) for p in props]
        self.props = props
        validate(cfg.policy, props)
        self.gains = ({id(p): wc_gains(p, cfg.policy) for p in props}
                      if cfg.policy.kind is PolicyKind.RHO_ETT_WC else None)
        self.atoms = {a.name: a for p in props for a in atoms(p) if a.name}

        Ts = cfg.Ts
        A, B = _matrices(Ts)
        q_acc = np.asarray(cfg.q_acc, dtype=float)
        q_other = np.asarray(cfg.q_other, dtype=float)
        self.ego_model = LtiModel(A, B, [[0.0, 1.0]], q_acc, [[cfg.r["v"]]], Ts,
                                  ("p", "v"), ("v",))
        # relative state (d, vrel) of a surrounding vehicle; the lead's input is
        # unknown, the ego command optionally enters as -B u
        B_rel = -B if cfg.other_input == "ego" else np.zeros_like(B)
        self.rel_model = LtiModel(A, B_rel, [[1.0, 0.0]], q_other, [[cfg.r["x_delta"]]], Ts,
                                  ("d", "vrel"), ("d",))
        self.r = {s: float(cfg.r[s]) for s in self.sensors}

        idm: IdmParams = cfg.idm
        self.idm = idm
        gap0 = idm.d0 + cfg.v_init * idm.T + cfg.spacing_extra
        self.ego = _Vehicle("ego", SLOW, 0.0, cfg.v_init)
        sched = tuple(tuple(p) for p in cfg.lead_schedule)
        self.others = [_Vehicle("lead", SLOW, gap0, cfg.v_init, schedule=sched)]
        if self.multi:
            # a second scheduled vehicle ahead of the lead and IDM traffic behind the
            # ego, so the other-lane sensors always have a target after a lane change
            self.others.append(_Vehicle("lead2", SLOW, 2 * gap0, cfg.v_init, schedule=sched))
            self.others.append(_Vehicle("slow_back", SLOW, -gap0, cfg.v_init, v0=cfg.v_init))
            fl = cfg.fast_lane
            speeds = fl.get("speeds") or [fl["speed"]] * len(fl["offsets"])
            if len(speeds) != len(fl["offsets"]):
                raise ValueError("fast_lane speeds and offsets differ in length")
            for i, (off, sp) in enumerate(zip(fl["offsets"], speeds)):
                self.others.append(_Vehicle(f"fast{i}", FAST, float(off), float(sp), v0=float(sp)))
        self.virtual = {role: _Vehicle(f"none_{role}", -1, 0.0, cfg.v_init)
                        for role in self.sensors[1:]}
        self._move_virtual()
        self.rng = make_rng(self.seed)

    # geometry ------------------------------------------------------------

    def _targets(self) -> dict[str, _Vehicle]:
        """Nearest vehicle per sensor role; an empty range reads as a virtual target at
        the sensor range that moves with the ego."""
        ego = self.ego
        best = {role: (SENSOR_RANGE, self.virtual[role]) for role in self.sensors[1:]}
        for veh in self.others:
            d = veh.pos - ego.pos
            if veh.lane == ego.lane:
                role, dist = ("x_delta", d) if d > 0 else (None, 0.0)
            elif d >= 0:
                role, dist = "x_lop", d
            else:
                role, dist = "x_lof", -d
            if role in best and dist < best[role][0]:
                best[role] = (dist, veh)
        return {role: veh for role, (_, veh) in best.items()}

    def _move_virtual(self) -> None:
        for role, veh in self.virtual.items():
            veh.pos = self.ego.pos + (-SENSOR_RANGE if role == "x_lof" else SENSOR_RANGE)
            veh.speed = self.ego.speed

    def _traffic_accel(self, veh: _Vehicle, t: float) -> float:
        if veh.schedule is not None:
            return lead_profile(t, veh.schedule)
        leader_gap, leader_speed = math.inf, veh.speed
        for other in self.others + [self.ego]:
            if other is veh or other.lane != veh.lane:
                continue
            d = other.pos - veh.pos
            if 0 < d < leader_gap:
                leader_gap, leader_speed = d, other.speed
        p = self.idm
        traffic = IdmParams(p.d0, p.T, p.a_max, p.b, veh.v0, p.exponent, p.a_min, p.a_limit,
                            p.variant)
        return idm_accel(veh.speed, veh.speed - leader_speed, leader_gap, traffic)

    def _true_states(self, targets) -> dict[str, float]:
        ego = self.ego
        x = {"v": ego.speed}
        for role, veh in targets.items():
            s_name, v_name = ROLE_STATES[role]
            d, vr = veh.pos - ego.pos, veh.speed - ego.speed
            x[s_name] = -d if role == "x_lof" else d
            x[v_name] = vr
        return x

    def _est_states(self, ego_f, filters, targets) -> dict[str, float]:
        x = {"v": ego_f.x2}
        for role, veh in targets.items():
            s_name, v_name = ROLE_STATES[role]
            f = filters[veh.name]
            d, vr = f.x1, f.x2
            x[s_name] = -d if role == "x_lof" else d
            x[v_name] = vr
        return x

    def _box(self, ego_f, filters, targets, delta_used, received, u):
        """Predicted next-step box of every property state."""
        z = self.cfg.z_sigma
        r_v = 0.0 if received.get("v", True) else delta_used.get("v", 0.0)
        box = {"v": ego_f.predict_interval({"v": r_v}, u, z)["v"]}
        for role, veh in targets.items():
            s_name, v_name = ROLE_STATES[role]
            r = 0.0 if received.get(role, True) else delta_used.get(role, 0.0)
            b = filters[veh.name].predict_interval({"d": r}, u, z)
            box[s_name] = -b["d"] if role == "x_lof" else b["d"]
            box[v_name] = b["vrel"]
        return box

    def _monitor(self, x_hat, box):
        return regulate(self.cfg.policy, self.props, x_hat, box, self.gains)

    def _control(self, x_hat) -> float:
        s = max(x_hat["x_delta"], 1e-3)
        return idm_accel(x_hat["v"], -x_hat["vrel_delta"], s, self.idm)

    def _want_lane_change(self, x_hat) -> bool:
        lc = self.cfg.lane_change
        names = ("b1", "b2", "b3")
        if not all(n in self.atoms for n in names):
            return False
        r1 = robustness(self.atoms["b1"], x_hat)
        r23 = min(robustness(self.atoms["b2"], x_hat), robustness(self.atoms["b3"], x_hat))
        closing = -x_hat["vrel_delta"] > lc.get("closing_above", 0.0)
        return r1 < lc["b1_below"] and r23 > lc["b23_above"] and closing

    # main loop -----------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        Ts, N = cfg.Ts, cfg.steps
        tt = cfg.policy.kind is PolicyKind.TT
        wc = cfg.policy.kind is PolicyKind.RHO_ETT_WC
        sensors = self.sensors
        n_s = len(sensors)

        w_ego = self.rng.multivariate_normal(np.zeros(2), np.asarray(cfg.q_acc, dtype=float),
                                             size=N, method="eigh")
        sigma = np.array([math.sqrt(cfg.r[s]) for s in sensors])
        v_noise = self.rng.standard_normal((N, n_s)) * sigma

        ego = self.ego
        ego_f = TwoStateFilter(self.ego_model,
                               EstimatorState([ego.pos, ego.speed], self.ego_model.Q.copy()))
        filters = {veh.name: TwoStateFilter(self.rel_model, EstimatorState(
                       [veh.pos - ego.pos, veh.speed - ego.speed], self.rel_model.Q.copy()))
                   for veh in self.others + list(self.virtual.values())}
        targets = self._targets()
        x_hat = self._est_states(ego_f, filters, targets)
        received = {s: True for s in sensors}
        box = self._box(ego_f, filters, targets, {}, received, 0.0) if wc else None
        delta = self._monitor(x_hat, box)
        u = self._control(x_hat)
        events = {s: 0 for s in sensors}
        lane_change_time = None

        cols = ["t"] + [f"true_{s}" for s in self.state_names] + \
            [f"est_{s}" for s in self.state_names] + \
            [f"delta_{s}" for s in sensors] + [f"trig_{s}" for s in sensors] + \
            ["rho_hat", "rho_true", "u", "lane"]
        trace = np.empty((N + 1, len(cols)))

        def record(k, x_true, trig):
            rho_hat = min(robustness(p, x_hat) for p in self.props)
            rho_true = min(robustness(p, x_true) for p in self.eval_props)
            row = [k * Ts] + [x_true[s] for s in self.state_names] + \
                [x_hat[s] for s in self.state_names] + \
                [delta.get(s, math.inf) for s in sensors] + [float(trig[s]) for s in sensors] + \
                [rho_hat, rho_true, u, float(ego.lane)]
            trace[k] = row
            return rho_true

        rho_min = record(0, self._true_states(targets), {s: False for s in sensors})

        for k in range(1, N + 1):
            t_prev = (k - 1) * Ts
            # (1) true dynamics
            for veh in self.others:
                veh.accel = self._traffic_accel(veh, t_prev)
            before = {veh.name: veh.pos - ego.pos for veh in self.others}
            a = u + cfg.wind_bias
            ego.pos += ego.speed * Ts + 0.5 * a * Ts * Ts + w_ego[k - 1, 0]
            ego.speed += a * Ts + w_ego[k - 1, 1]
            for veh in self.others:
                veh.pos += veh.speed * Ts + 0.5 * veh.accel * Ts * Ts
                veh.speed = max(veh.speed + veh.accel * Ts, 0.0)
            self._move_virtual()
            self._check_collisions(k * Ts, before)

            ego_f.predict(u)
            for f in filters.values():
                f.predict(u)

            # (2) sensors sample, (3) innovation errors, (4) trigger checks
            targets = self._targets()
            x_true = self._true_states(targets)
            trig = {}
            for j, s in enumerate(sensors):
                d_s = delta.get(s, math.inf)
                if s == "v":
                    f, y = ego_f, ego.speed + v_noise[k - 1, j]
                else:
                    veh = targets[s]
                    # the follower sensor reports -d; the filter measures d
                    f = filters[veh.name]
                    d = veh.pos - ego.pos
                    y = d + (-v_noise[k - 1, j] if s == "x_lof" else v_noise[k - 1, j])
                fired = tt or abs(f.output() - y) > d_s
                trig[s] = fired
                if fired:
                    events[s] += 1
                # (5) filter update
                f.update(fired, y, d_s, self.r[s])

            # (6)-(7) monitor and next thresholds
            x_hat = self._est_states(ego_f, filters, targets)
            if self.multi and ego.lane == SLOW and self._want_lane_change(x_hat):
                ego.lane = FAST
                lane_change_time = k * Ts
                targets = self._targets()
                x_hat = self._est_states(ego_f, filters, targets)
            # (8) control; computed before the box because the prediction needs it
            delta_used = delta
            u = self._control(x_hat)
            box = self._box(ego_f, filters, targets, delta_used, trig, u) if wc else None
            delta = self._monitor(x_hat, box)

            rho_min = min(rho_min, record(k, x_true, trig))

        return SimResult(cfg.kind, self.seed, float(rho_min), events, N, tuple(cols), trace,
                         lane_change_time)

    def _check_collisions(self, t: float, before: dict[str, float]) -> None:
        """A same-lane vehicle whose offset to the ego changed sign (or hit zero) collided."""
        ego = self.ego
        for veh in self.others:
            if veh.lane != ego.lane:
                continue
            d = veh.pos - ego.pos
            d0 = before[veh.name]
            if d == 0 or (d0 > 0) != (d > 0):
                raise CollisionError(f"collision between ego and {veh.name} at t={t:.2f}s "
                                     f"(gap {d0:.3f} m -> {d:.3f} m)")


def run_acc(cfg: ScenarioConfig, seed: int) -> SimResult:
    return AccWorld(cfg, seed).run()
