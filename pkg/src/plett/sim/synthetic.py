"""Synthetic linear plant for checking the sign guarantees exactly.

Each state evolves independently, ``x_i+ = a_i x_i + b_i u_i + w_i``, with a
known sinusoidal input and noise drawn from a normal distribution truncated to
``[-w_i, w_i]``. Every state is measured directly and without noise and sent
over its own innovation-triggered channel. Because the plant is diagonal the
Kalman filter splits into exact scalar filters.

The worst-case box for the next step is built from the current box (radius 0
on channels that just transmitted, the active threshold otherwise), mapped
through the dynamics and widened by the noise bound. With the estimate
initialised at the true state this box always contains the true state, so
the regime meets the hypotheses of the worst-case gain synthesis.

:func:`run_synthetic` goes through the library policy code one run at a
time; :func:`run_synthetic_batch` advances many seeds at once with numpy and
reproduces the same traces.
"""

from __future__ import annotations

import math

import numpy as np

from ..ettreg import PolicyKind, regulate, validate, wc_gains
from ..interval import Interval
from ..logic import And, Comparator, LinearAtom, Or, parse, robustness, signals_of
from .acc import make_rng
from .config import ScenarioConfig
from .result import SimResult

MAX_REDRAWS = 1000


def truncated_normal(rng: np.random.Generator, sigma: np.ndarray, bound: np.ndarray,
                     steps: int) -> np.ndarray:
    """``(steps, n)`` draws of N(0, sigma^2) restricted to the open interval ``(-bound, bound)``.

    Out-of-range draws are redrawn in place, so the stream only depends on the seed.
    A zero bound gives exact zeros.
    """
    n = len(sigma)
    w = rng.standard_normal((steps, n)) * sigma
    live = bound > 0
    w[:, ~live] = 0.0
    for _ in range(MAX_REDRAWS):
        bad = (np.abs(w) >= bound) & live
        if not bad.any():
            return w
        w[bad] = rng.standard_normal(int(bad.sum())) * np.broadcast_to(sigma, w.shape)[bad]
    raise RuntimeError("noise bound is too tight for the noise level")


def _vector(syn: dict, key: str, n: int) -> list[float]:
    v = [float(x) for x in syn[key]]
    if len(v) != n:
        raise ValueError(f"synthetic.{key} needs {n} entries, got {len(v)}")
    return v


class _Setup:
    """Parsed plant, properties and policy shared by both runners."""

    def __init__(self, cfg: ScenarioConfig):
        syn = cfg.synthetic
        self.a = [float(x) for x in syn["a"]]
        n = self.n = len(self.a)
        self.b = _vector(syn, "b", n)
        self.x0 = _vector(syn, "x0", n)
        self.w_bound = _vector(syn, "noise_bound", n)
        self.q = _vector(syn, "q", n)
        amp = _vector(syn, "amplitude", n)
        period = _vector(syn, "period", n)
        if any(v <= 0 for v in self.q):
            raise ValueError("synthetic.q must be positive")
        if any(v < 0 for v in self.w_bound):
            raise ValueError("synthetic.noise_bound must be non-negative")
        self.names = tuple(f"x{i + 1}" for i in range(n))
        self.props = [parse(t, states=self.names, rho_max=cfg.rho_max) for t in cfg.properties]
        validate(cfg.policy, self.props)
        self.policy = cfg.policy
        self.wc = cfg.policy.kind is PolicyKind.RHO_ETT_WC
        self.gains = {id(p): wc_gains(p, cfg.policy) for p in self.props} if self.wc else None
        self.steps = cfg.steps
        self.Ts = cfg.Ts
        self.kind = cfg.kind
        self.inputs = [[amp[i] * math.sin(2.0 * math.pi * k / period[i]) for i in range(n)]
                       for k in range(self.steps + 1)]
        self.columns = ("t", *(f"true_{s}" for s in self.names), *(f"est_{s}" for s in self.names),
                        *(f"delta_{s}" for s in self.names), *(f"trig_{s}" for s in self.names),
                        "rho_hat", "rho_true")

    def noise(self, seed: int) -> np.ndarray:
        return truncated_normal(make_rng(seed), np.sqrt(self.q), np.array(self.w_bound), self.steps)

    def result(self, seed, trace, events, sign_violations, containment_violations) -> SimResult:
        return SimResult(kind=self.kind, seed=int(seed), rho_min_true=float(trace[:, -1].min()),
                         events=events, steps=self.steps, columns=self.columns, trace=trace,
                         info={"sign_violations": sum(sign_violations),
                               "sign_violations_per_property": list(sign_violations),
                               "containment_violations": containment_violations})


def run_synthetic(cfg: ScenarioConfig, seed: int) -> SimResult:
    su = _Setup(cfg)
    a, b, q, w_bound, names, n = su.a, su.b, su.q, su.w_bound, su.names, su.n
    props, steps, inputs = su.props, su.steps, su.inputs
    noise = su.noise(seed).tolist()

    x = list(su.x0)
    xh = list(su.x0)
    p = list(q)
    radius = [0.0] * n

    def box(u):
        out = {}
        for i, s in enumerate(names):
            c = a[i] * xh[i] + b[i] * u[i]
            w = abs(a[i]) * radius[i] + w_bound[i]
            out[s] = Interval(c - w, c + w)
        return out

    def thresholds(u):
        d = regulate(su.policy, props, dict(zip(names, xh)), box(u) if su.wc else None, su.gains)
        return [d.get(s, math.inf) for s in names]

    events = dict.fromkeys(names, 0)
    sign_violations = [0] * len(props)
    containment_violations = 0
    rows = []
    delta = thresholds(inputs[0])
    for k in range(steps):
        u = inputs[k]
        pred = box(u)
        for i in range(n):
            x[i] = a[i] * x[i] + b[i] * u[i] + noise[k][i]
            if not pred[names[i]].lo <= x[i] <= pred[names[i]].hi:
                containment_violations += 1
        trig = [False] * n
        for i in range(n):
            xp = a[i] * xh[i] + b[i] * u[i]
            pp = a[i] * a[i] * p[i] + q[i]
            if abs(xp - x[i]) > delta[i]:
                # noise-free measurement: the gain is one
                trig[i] = True
                events[names[i]] += 1
                xh[i], p[i] = x[i], 0.0
            elif math.isinf(delta[i]):
                xh[i], p[i] = xp, pp
            else:
                r = delta[i] * delta[i] / 3.0
                xh[i], p[i] = xp, pp * r / (pp + r)
            radius[i] = 0.0 if trig[i] else delta[i]
        est = dict(zip(names, xh))
        tru = dict(zip(names, x))
        rho_hat = [robustness(phi, est) for phi in props]
        rho_true = [robustness(phi, tru) for phi in props]
        for j in range(len(props)):
            if (rho_hat[j] > 0) != (rho_true[j] > 0):
                sign_violations[j] += 1
        used = delta
        delta = thresholds(inputs[k + 1])
        rows.append([(k + 1) * su.Ts, *x, *xh, *used, *map(float, trig),
                     min(rho_hat), min(rho_true)])

    trace = np.array(rows, dtype=float).reshape(steps, len(su.columns))
    return su.result(seed, trace, events, sign_violations, containment_violations)


# -- batched runner: the same arithmetic on arrays with one entry per seed --

def _rho(atom: LinearAtom, x: dict) -> np.ndarray:
    p = sum(c * x[s] for s, c in atom.coefficients) + atom.offset
    return p - atom.threshold if atom.comparator is Comparator.GT else atom.threshold - p


def _rho_lower(atom: LinearAtom, lo: dict, hi: dict) -> np.ndarray:
    low = high = atom.offset
    for s, c in atom.coefficients:
        if c >= 0:
            low = low + c * lo[s]
            high = high + c * hi[s]
        else:
            low = low + c * hi[s]
            high = high + c * lo[s]
    return low - atom.threshold if atom.comparator is Comparator.GT else atom.threshold - high


def _rho_tree(phi, x: dict) -> np.ndarray:
    if isinstance(phi, LinearAtom):
        return _rho(phi, x)
    op = np.minimum if isinstance(phi, And) else np.maximum
    return op(_rho_tree(phi.left, x), _rho_tree(phi.right, x))


def _refine_batch(phi, rho_of, eps_of, out: dict) -> None:
    zeta, rho = {}, {}

    def up(node):
        if isinstance(node, LinearAtom):
            r = rho[id(node)] = rho_of(node)
            z = np.maximum(r, 0.0) / node.rho_max
        else:
            op = np.minimum if isinstance(node, And) else np.maximum
            z = op(up(node.left), up(node.right))
        zeta[id(node)] = z
        return z

    def down(node, beta):
        if isinstance(node, LinearAtom):
            r = rho[id(node)]
            zn = np.maximum(r, 0.0) / node.rho_max
            relax = np.maximum(beta - zn, 0.0) * node.rho_max
            for s in node.signals:
                e = eps_of(node, s)
                d = np.maximum(r, 0.0) / e + relax / e
                out[s] = d if s not in out else np.minimum(out[s], d)
        elif isinstance(node, And):
            down(node.left, beta)
            down(node.right, beta)
        else:
            down(node.left, np.maximum(beta, zeta[id(node.right)]))
            down(node.right, np.maximum(beta, zeta[id(node.left)]))

    down(phi, up(phi))


def run_synthetic_batch(cfg: ScenarioConfig, seeds) -> list[SimResult]:
    """:func:`run_synthetic` for many seeds at once; results match it run by run."""
    su = _Setup(cfg)
    seeds = [int(s) for s in seeds]
    N, n, steps, names, props = len(seeds), su.n, su.steps, su.names, su.props
    a, b, q, w_bound = su.a, su.b, su.q, su.w_bound
    noise = np.stack([su.noise(s) for s in seeds], axis=1)  # (steps, N, n)
    kind = su.policy.kind
    bound = set().union(*(signals_of(phi) for phi in props))

    x = [np.full(N, v) for v in su.x0]
    xh = [np.full(N, v) for v in su.x0]
    p = [np.full(N, v) for v in q]
    radius = [np.zeros(N) for _ in range(n)]

    def box(u):
        lo, hi = {}, {}
        for i, s in enumerate(names):
            c = a[i] * xh[i] + b[i] * u[i]
            w = abs(a[i]) * radius[i] + w_bound[i]
            lo[s], hi[s] = c - w, c + w
        return lo, hi

    def thresholds(u):
        if kind is PolicyKind.TT:
            d = {s: np.zeros(N) for s in bound}
        elif kind is PolicyKind.CETT:
            d = {s: np.full(N, v) for s, v in su.policy.delta.items()}
        else:
            d = {}
            if kind is PolicyKind.RHO_ETT:
                est = dict(zip(names, xh))
                for phi in props:
                    _refine_batch(phi, lambda at: _rho(at, est), su.policy.eps_for, d)
            else:
                lo, hi = box(u)
                for phi in props:
                    g = su.gains[id(phi)]
                    _refine_batch(phi, lambda at: _rho_lower(at, lo, hi),
                                  lambda at, s: g[id(at)][s], d)
        return [d.get(s, np.full(N, math.inf)) for s in names]

    events = np.zeros((N, n), dtype=np.int64)
    sign_violations = np.zeros((N, len(props)), dtype=np.int64)
    containment = np.zeros(N, dtype=np.int64)
    trace = np.empty((steps, N, len(su.columns)))
    delta = thresholds(su.inputs[0])
    for k in range(steps):
        u = su.inputs[k]
        lo, hi = box(u)
        for i, s in enumerate(names):
            x[i] = a[i] * x[i] + b[i] * u[i] + noise[k, :, i]
            containment += ~((lo[s] <= x[i]) & (x[i] <= hi[s]))
        trig = []
        for i in range(n):
            xp = a[i] * xh[i] + b[i] * u[i]
            pp = a[i] * a[i] * p[i] + q[i]
            fired = np.abs(xp - x[i]) > delta[i]
            silent_inf = ~fired & np.isinf(delta[i])
            with np.errstate(invalid="ignore"):
                r = delta[i] * delta[i] / 3.0
                p_silent = pp * r / (pp + r)
            xh[i] = np.where(fired, x[i], xp)
            p[i] = np.where(fired, 0.0, np.where(silent_inf, pp, p_silent))
            radius[i] = np.where(fired, 0.0, delta[i])
            events[:, i] += fired
            trig.append(fired)
        est = dict(zip(names, xh))
        tru = dict(zip(names, x))
        rho_hat = [_rho_tree(phi, est) for phi in props]
        rho_true = [_rho_tree(phi, tru) for phi in props]
        for j in range(len(props)):
            sign_violations[:, j] += (rho_hat[j] > 0) != (rho_true[j] > 0)
        row = trace[k]
        row[:, 0] = (k + 1) * su.Ts
        col = 1
        for group in (x, xh, delta, trig):
            for v in group:
                row[:, col] = v
                col += 1
        row[:, col] = np.minimum.reduce(rho_hat)
        row[:, col + 1] = np.minimum.reduce(rho_true)
        delta = thresholds(su.inputs[k + 1])

    return [su.result(seed, np.ascontiguousarray(trace[:, j, :]),
                      {s: int(events[j, i]) for i, s in enumerate(names)},
                      sign_violations[j].tolist(), int(containment[j]))
            for j, seed in enumerate(seeds)]
