"""Steering function f(t), feedback drive g(t), and the detector model.

The drive law is g(t) = g0(t) * cos(phase(t)) * [f(t) - M_z_measured], where
phase(t) is the accumulated integral of omega (identical to omega * t for a
constant frequency). g0 and omega are schedules: constants by default, or
piecewise-linear tables for slow parameter ramps. All evaluations are pure
functions of t and the measured M_z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError

STEERING_KINDS = ("linear", "stepwise", "table")


class Schedule:
    """A scalar parameter over time: constant, or piecewise-linear breakpoints.

    Outside the breakpoint range the boundary value is held. ``integral`` is
    the exact integral of the piecewise-linear curve from 0 to t (used for
    phase accumulation so frequency ramps produce no phase jumps).
    """

    def __init__(self, value: float = 0.0, table: Optional[np.ndarray] = None):
        self._const = float(value)
        self._table = None
        if table is not None:
            pts = np.asarray(table, dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
                raise ConfigError("schedule table must be a (K, 2) array of (t, value)")
            if pts.shape[0] > 1 and not np.all(np.diff(pts[:, 0]) > 0):
                raise ConfigError("schedule table times must be strictly increasing")
            self._table = pts
            # Cumulative integral at each breakpoint, with the first value held
            # flat on [0, t_0].
            ts, vs = pts[:, 0], pts[:, 1]
            cum = np.zeros(len(ts))
            cum[0] = vs[0] * ts[0]
            if len(ts) > 1:
                seg = 0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)
                cum[1:] = cum[0] + np.cumsum(seg)
            self._cum = cum

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls(value=value)

    @classmethod
    def from_table(cls, points: Sequence[Sequence[float]]) -> "Schedule":
        return cls(table=np.asarray(points, dtype=np.float64))

    @property
    def is_constant(self) -> bool:
        return self._table is None

    @property
    def constant_value(self) -> float:
        if not self.is_constant:
            raise ConfigError("schedule is not constant")
        return self._const

    def __call__(self, t: float) -> float:
        if self._table is None:
            return self._const
        return float(np.interp(t, self._table[:, 0], self._table[:, 1]))

    def integral(self, t: float) -> float:
        """Integral from 0 to t; exactly value * t for a constant schedule."""
        if self._table is None:
            return self._const * t
        ts, vs = self._table[:, 0], self._table[:, 1]
        if t <= ts[0]:
            return float(vs[0] * t)
        if t >= ts[-1]:
            return float(self._cum[-1] + vs[-1] * (t - ts[-1]))
        i = int(np.searchsorted(ts, t, side="right")) - 1
        v_t = vs[i] + (vs[i + 1] - vs[i]) * (t - ts[i]) / (ts[i + 1] - ts[i])
        return float(self._cum[i] + 0.5 * (vs[i] + v_t) * (t - ts[i]))

    def min_value(self) -> float:
        if self._table is None:
            return self._const
        return float(np.min(self._table[:, 1]))

    def to_json(self):
        if self._table is None:
            return self._const
        return {"table": self._table.tolist()}


def schedule_from_json(obj) -> Schedule:
    if isinstance(obj, (int, float)):
        return Schedule.constant(float(obj))
    if isinstance(obj, dict) and "table" in obj:
        return Schedule.from_table(obj["table"])
    raise ConfigError(f"cannot parse schedule from {obj!r}")


@dataclass(frozen=True)
class SteeringSpec:
    """Reference trajectory the feedback entrains M_z to follow."""

    kind: str = "linear"
    fdot: float = -0.005  # linear rate
    df: float = 0.0  # stepwise jump
    dt_step: float = 1.0  # stepwise interval
    table: Optional[np.ndarray] = field(default=None, compare=False)  # (K, 2) breakpoints

    def __post_init__(self):
        if self.kind not in STEERING_KINDS:
            raise ConfigError(f"unknown steering kind {self.kind!r}")
        if self.kind == "stepwise" and not (self.dt_step > 0):
            raise ConfigError("stepwise steering requires dt_step > 0")
        if self.kind == "table":
            pts = np.asarray(self.table, dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
                raise ConfigError("steering table must be a (K, 2) array of (t, f)")
            if pts.shape[0] > 1 and not np.all(np.diff(pts[:, 0]) > 0):
                raise ConfigError("steering table times must be strictly increasing")
            object.__setattr__(self, "table", pts)

    def kernel_args(self) -> tuple:
        """(kind_code, fdot, df, dt_step, table_t, table_f) for compiled loops."""
        if self.kind == "linear":
            code = _kernels.STEER_LINEAR
        elif self.kind == "stepwise":
            code = _kernels.STEER_STEPWISE
        else:
            code = _kernels.STEER_TABLE
        empty = np.zeros(0, dtype=np.float64)
        tt = self.table[:, 0].copy() if self.table is not None else empty
        tf = self.table[:, 1].copy() if self.table is not None else empty
        return code, self.fdot, self.df, self.dt_step, tt, tf


def f_of_t(steering: SteeringSpec, t: float) -> float:
    """Steering function value at time t >= 0.

    linear: fdot * t; stepwise: df * floor(t / dt_step); table: piecewise
    linear, clamped to the boundary values outside the breakpoint range.
    """
    if steering.kind == "linear":
        return steering.fdot * t
    if steering.kind == "stepwise":
        return steering.df * float(np.floor(t / steering.dt_step))
    return float(np.interp(t, steering.table[:, 0], steering.table[:, 1]))


@dataclass(frozen=True)
class DetectorModel:
    """M_z measurement model: additive Gaussian noise plus sample-and-hold.

    noise_sigma = 0 and hold_interval = 0 is the ideal continuous detector.
    """

    noise_sigma: float = 0.0
    hold_interval: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0 or self.hold_interval < 0:
            raise ConfigError("detector noise_sigma and hold_interval must be >= 0")

    @property
    def is_ideal(self) -> bool:
        return self.noise_sigma == 0.0 and self.hold_interval == 0.0


class Detector:
    """Stateful runtime for a DetectorModel (owns the noise stream)."""

    def __init__(self, model: DetectorModel, rng: Optional[np.random.Generator] = None):
        self.model = model
        self.rng = rng
        self._window = None
        self._held = 0.0
        if not model.is_ideal and model.noise_sigma > 0 and rng is None:
            raise ConfigError("noisy detector requires a random generator")

    def measure(self, true_mz: float, t: float) -> float:
        m = self.model
        if m.is_ideal:
            return true_mz
        if m.hold_interval == 0.0:
            return true_mz + m.noise_sigma * self.rng.standard_normal()
        window = int(np.floor(t / m.hold_interval))
        if window != self._window:
            self._window = window
            noise = m.noise_sigma * self.rng.standard_normal() if m.noise_sigma > 0 else 0.0
            self._held = true_mz + noise
        return self._held

    def state_dict(self) -> dict:
        out = {"window": self._window, "held": self._held}
        if self.rng is not None:
            out["rng"] = self.rng.bit_generator.state
        return out

    def load_state(self, state: dict) -> None:
        self._window = state.get("window")
        self._held = float(state.get("held", 0.0))
        if "rng" in state and self.rng is not None:
            self.rng.bit_generator.state = state["rng"]


def measured_mz(detector: Detector, true_mz: float, t: float) -> float:
    """Detector reading of M_z at time t (ideal detectors pass through)."""
    return detector.measure(true_mz, t)


@dataclass(frozen=True)
class FeedbackConfig:
    """Drive parameters: amplitude and frequency schedules, steering, field."""

    g0: Schedule = field(default_factory=lambda: Schedule.constant(0.2))
    omega: Schedule = field(default_factory=lambda: Schedule.constant(7.0))
    steering: SteeringSpec = field(default_factory=SteeringSpec)
    hz: float = 0.0
    detector: DetectorModel = field(default_factory=DetectorModel)
    guard_factor: float = 10.0  # tracking lost when |f - M_z| > guard_factor * sqrt(N)

    def __post_init__(self):
        if self.omega.min_value() <= 0:
            raise ConfigError("omega must be positive wherever evaluated")
        if self.guard_factor <= 0:
            raise ConfigError("guard_factor must be positive")

    @property
    def constant_drive_params(self) -> bool:
        return self.g0.is_constant and self.omega.is_constant

    def phase(self, t: float) -> float:
        return self.omega.integral(t)


def g_of_t(cfg: FeedbackConfig, t: float, measured: float) -> float:
    """Feedback drive amplitude g(t) = g0(t) cos(phase(t)) [f(t) - M_z]."""
    f = f_of_t(cfg.steering, t)
    return cfg.g0(t) * float(np.cos(cfg.phase(t))) * (f - measured)
