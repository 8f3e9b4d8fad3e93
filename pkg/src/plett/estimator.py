"""Discrete-time LTI models and a Kalman filter that uses threshold knowledge.

When a channel does not transmit, its measurement is replaced by the
predicted output and its noise variance is inflated by ``delta**2 / 3``,
the variance of a uniform distribution on ``[-delta, delta]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .interval import Interval


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    return m


def _check_psd(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if m.size and np.linalg.eigvalsh(m).min() < -1e-12:
        raise ValueError(f"{name} must be positive semi-definite")


@dataclass
class LtiModel:
    """``x' = A x + B u + w``, ``y = C x + r`` with ``w ~ (0, Q)``, ``r ~ (0, R)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Ts: float = 1.0
    state_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
        self.C = _as_matrix(self.C, "C")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n}")
        p = self.C.shape[0]
        self.Q = _as_matrix(self.Q, "Q")
        self.R = _as_matrix(self.R, "R")
        if self.Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {self.Q.shape}")
        if self.R.shape != (p, p):
            raise ValueError(f"R must be {p}x{p}, got {self.R.shape}")
        _check_psd(self.Q, "Q")
        _check_psd(self.R, "R")
        if not self.Ts > 0:
            raise ValueError(f"Ts must be positive, got {self.Ts}")
        self.state_names = tuple(self.state_names) or tuple(f"x{i}" for i in range(n))
        self.output_names = tuple(self.output_names) or tuple(f"y{i}" for i in range(p))
        if len(self.state_names) != n or len(self.output_names) != p:
            raise ValueError("state/output names do not match the model dimensions")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass
class EstimatorState:
    xhat: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.xhat = np.asarray(self.xhat, dtype=float).reshape(-1)
        self.P = np.asarray(self.P, dtype=float)

    def named(self, model: LtiModel) -> dict[str, float]:
        return dict(zip(model.state_names, self.xhat.tolist()))


def kf_predict(model: LtiModel, est: EstimatorState, u=None) -> EstimatorState:
    """Standard prediction: ``A x + B u`` and ``A P A' + Q``."""
    if est.xhat.shape != (model.n,) or est.P.shape != (model.n, model.n):
        raise ValueError("estimator state does not match the model dimensions")
    x = model.A @ est.xhat
    if u is not None:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != model.B.shape[1]:
            raise ValueError(f"input has {u.shape[0]} entries, expected {model.B.shape[1]}")
        x = x + model.B @ u
    P = model.A @ est.P @ model.A.T + model.Q
    return EstimatorState(x, P)


def effective_noise(model: LtiModel, received: Sequence[bool],
                    delta: Sequence[float]) -> np.ndarray:
    """Measurement covariance with ``delta**2 / 3`` added for silent channels."""
    R = model.R.copy()
    for i, (got, d) in enumerate(zip(received, delta)):
        if not got:
            if d < 0:
                raise ValueError(f"threshold of channel {i} is negative: {d}")
            R[i, i] += d * d / 3.0
    return R


def kf_update(model: LtiModel, est: EstimatorState, received: Sequence[bool],
              y: Sequence[float] | None, delta: Sequence[float]) -> EstimatorState:
    """Measurement update from the predicted state ``est``.

    Channels that did not transmit use the predicted output as measurement.
    A silent channel with an infinite threshold carries no information and is
    left out of the update.
    """
    received = np.asarray(received, dtype=bool).reshape(-1)
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if received.shape[0] != model.p or delta.shape[0] != model.p:
        raise ValueError(f"expected {model.p} channel flags and thresholds")
    yhat = model.C @ est.xhat
    if received.any():
        if y is None:
            raise ValueError("measurements are required for received channels")
        y = np.asarray(y, dtype=float).reshape(-1)
        if np.isnan(y[received]).any():
            raise ValueError("missing measurement for a received channel")
        y_used = np.where(received, y, yhat)
    else:
        y_used = yhat

    keep = received | np.isfinite(delta)
    if not keep.any():
        return EstimatorState(est.xhat.copy(), est.P.copy())
    R = effective_noise(model, received, np.where(keep, delta, 0.0))
    if not keep.all():
        idx = np.flatnonzero(keep)
        C, R, innov = model.C[idx], R[np.ix_(idx, idx)], (y_used - yhat)[idx]
    else:
        C, innov = model.C, y_used - yhat

    PCt = est.P @ C.T
    S = C @ PCt + R
    K = np.linalg.solve(S, PCt.T).T
    x = est.xhat + K @ innov
    P = (np.eye(model.n) - K @ C) @ est.P
    P = 0.5 * (P + P.T)
    return EstimatorState(x, P)


def innovation_error(yhat_pred: float, y: float) -> float:
    """``|predicted - measured|``."""
    return abs(yhat_pred - y)


def sod_error(y_last_tx: float, y: float) -> float:
    """Send-on-delta error: distance to the last transmitted value."""
    return abs(y - y_last_tx)


def trigger_check(e: float, delta: float) -> bool:
    """Transmit iff the update error strictly exceeds the threshold."""
    return e > delta


@dataclass
class SensorChannel:
    """Sensor-side bookkeeping for one event-triggered channel."""

    signal: str
    last_value: float = math.nan
    last_time: int = -1
    delta: float = 0.0
    events: int = 0

    def offer(self, k: int, y: float, e: float) -> bool:
        """Check the trigger for sample ``y`` with update error ``e`` at step ``k``."""
        fired = trigger_check(e, self.delta)
        if fired:
            self.events += 1
            self.last_value = y
            self.last_time = k
        return fired


def predict_state_interval(model: LtiModel, est: EstimatorState,
                           delta_now: Mapping[str, float] | Sequence[float],
                           u=None, z_sigma: float = 3.0,
                           noise_bound: Sequence[float] | None = None) -> dict[str, Interval]:
    """Box containing the next state given the current threshold box.

    The box ``[xhat - delta, xhat + delta]`` (states without a threshold get
    radius 0) is mapped through ``A`` and ``B u`` with interval arithmetic and
    then widened by ``z_sigma * sqrt(diag(A P A' + Q))`` and, if given, an
    explicit per-state noise bound.
    """
    n = model.n
    if isinstance(delta_now, Mapping):
        unknown = set(delta_now) - set(model.state_names)
        if unknown:
            raise KeyError(f"unknown states {sorted(unknown)}")
        r = np.array([float(delta_now.get(s, 0.0)) for s in model.state_names])
    else:
        r = np.asarray(delta_now, dtype=float).reshape(n)
    if (r < 0).any():
        raise ValueError("state radii must be non-negative")
    center = model.A @ est.xhat
    if u is not None:
        center = center + model.B @ np.asarray(u, dtype=float).reshape(-1)
    # a centered box maps to the centered box with radius |A| r
    radius = np.abs(model.A) @ r
    if z_sigma:
        cov = model.A @ est.P @ model.A.T + model.Q
        radius = radius + z_sigma * np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if noise_bound is not None:
        radius = radius + np.asarray(noise_bound, dtype=float).reshape(n)
    return {s: Interval(c - rr, c + rr)
            for s, c, rr in zip(model.state_names, center.tolist(), radius.tolist())}


class TwoStateFilter:
    """Scalar-arithmetic version of :func:`kf_predict`/:func:`kf_update` for
    two-state, single-output models, used in long closed-loop runs.

    Mirrors the matrix code step by step, so results agree with it to
    rounding (checked in the tests).
    """

    __slots__ = ("a11", "a12", "a21", "a22", "b1", "b2", "c1", "c2", "q11", "q12", "q22",
                 "r", "x1", "x2", "p11", "p12", "p22", "names")

    def __init__(self, model: LtiModel, est: EstimatorState):
        if model.n != 2 or model.p != 1 or model.B.shape[1] != 1:
            raise ValueError("TwoStateFilter needs a two-state, single-input, single-output model")
        (self.a11, self.a12), (self.a21, self.a22) = model.A.tolist()
        self.b1, self.b2 = model.B[:, 0].tolist()
        self.c1, self.c2 = model.C[0].tolist()
        (self.q11, self.q12), (_, self.q22) = model.Q.tolist()
        self.r = float(model.R[0, 0])
        self.names = model.state_names
        self.x1, self.x2 = est.xhat.tolist()
        (self.p11, self.p12), (_, self.p22) = est.P.tolist()

    def copy(self) -> "TwoStateFilter":
        new = object.__new__(TwoStateFilter)
        for k in self.__slots__:
            setattr(new, k, getattr(self, k))
        return new

    def state(self) -> EstimatorState:
        return EstimatorState([self.x1, self.x2], [[self.p11, self.p12], [self.p12, self.p22]])

    def predict(self, u: float) -> None:
        a11, a12, a21, a22 = self.a11, self.a12, self.a21, self.a22
        x1, x2 = self.x1, self.x2
        self.x1 = a11 * x1 + a12 * x2 + self.b1 * u
        self.x2 = a21 * x1 + a22 * x2 + self.b2 * u
        p11, p12, p22 = self.p11, self.p12, self.p22
        # A P A' + Q, expanded
        m11 = a11 * p11 + a12 * p12
        m12 = a11 * p12 + a12 * p22
        m21 = a21 * p11 + a22 * p12
        m22 = a21 * p12 + a22 * p22
        self.p11 = m11 * a11 + m12 * a12 + self.q11
        self.p12 = m11 * a21 + m12 * a22 + self.q12
        self.p22 = m21 * a21 + m22 * a22 + self.q22

    def output(self) -> float:
        return self.c1 * self.x1 + self.c2 * self.x2

    def update(self, received: bool, y: float, delta: float, r: float | None = None) -> None:
        """Measurement update; ``r`` overrides the model's noise variance."""
        r0 = self.r if r is None else r
        if not received:
            if delta < 0:
                raise ValueError(f"threshold is negative: {delta}")
            if math.isinf(delta):
                return
            innov, r = 0.0, r0 + delta * delta / 3.0
        else:
            if math.isnan(y):
                raise ValueError("missing measurement for a received channel")
            innov, r = y - self.output(), r0
        c1, c2 = self.c1, self.c2
        pc1 = self.p11 * c1 + self.p12 * c2
        pc2 = self.p12 * c1 + self.p22 * c2
        s = c1 * pc1 + c2 * pc2 + r
        k1, k2 = pc1 / s, pc2 / s
        self.x1 += k1 * innov
        self.x2 += k2 * innov
        # (I - K C) P, then symmetrized
        p11 = self.p11 - k1 * pc1
        p12 = self.p12 - k1 * pc2
        p21 = self.p12 - k2 * pc1
        p22 = self.p22 - k2 * pc2
        self.p11, self.p12, self.p22 = p11, 0.5 * (p12 + p21), p22

    def predict_interval(self, radius: Mapping[str, float], u: float, z_sigma: float,
                         noise_bound: Sequence[float] | None = None) -> dict[str, Interval]:
        """Same box as :func:`predict_state_interval` from the current (posterior) state."""
        r1 = radius.get(self.names[0], 0.0)
        r2 = radius.get(self.names[1], 0.0)
        a11, a12, a21, a22 = self.a11, self.a12, self.a21, self.a22
        c1 = a11 * self.x1 + a12 * self.x2 + self.b1 * u
        c2 = a21 * self.x1 + a22 * self.x2 + self.b2 * u
        w1 = abs(a11) * r1 + abs(a12) * r2
        w2 = abs(a21) * r1 + abs(a22) * r2
        if z_sigma:
            p11, p12, p22 = self.p11, self.p12, self.p22
            v1 = (a11 * p11 + a12 * p12) * a11 + (a11 * p12 + a12 * p22) * a12 + self.q11
            v2 = (a21 * p11 + a22 * p12) * a21 + (a21 * p12 + a22 * p22) * a22 + self.q22
            w1 += z_sigma * math.sqrt(max(v1, 0.0))
            w2 += z_sigma * math.sqrt(max(v2, 0.0))
        if noise_bound is not None:
            w1 += noise_bound[0]
            w2 += noise_bound[1]
        return {self.names[0]: Interval(c1 - w1, c1 + w1), self.names[1]: Interval(c2 - w2, c2 + w2)}
