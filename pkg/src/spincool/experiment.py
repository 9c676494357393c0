"""Run orchestration: initialization, the integrate-measure-drive loop,
telemetry streaming, checkpointing, and seeded reproducibility.

Determinism contract: (config, seed) fully determines every output byte.
Time is always computed from the global step counter (t = step * dt, never
accumulated), telemetry emission never mutates the dynamical state or the
detector stream, and all reductions run in a fixed order on a single thread,
so results are independent of BLAS/OMP thread counts and of telemetry cadence.

RNG: the documented generator is Philox (numpy's counter-based bit generator)
keyed through SeedSequence(seed).spawn(2) -- child 0 initializes the spins
(N uniform doubles for z, then N for the azimuth), child 1 feeds the noisy
detector when one is configured.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .dynamics import (
    FieldEvaluator,
    IntegratorConfig,
    SpinState,
    get_evaluator,
    rk4_step,
    splitting_step,
)
from .errors import ConfigError, SimulationAbort
from .feedback import Detector, FeedbackConfig, f_of_t, g_of_t
from .lattice import CouplingTable, LatticeSpec, build_couplings
from .observables import TelemetryRecord, collective

CHECKPOINT_FORMAT = "spincool-checkpoint-v1"
INIT_KINDS = ("infinite_temperature", "aligned", "from_checkpoint")
SELF_TEST_MAX_SITES = 4096  # FFT-vs-direct startup check needs the dense matrices
SELF_TEST_TOL = 1e-10


@dataclass(frozen=True)
class InitSpec:
    kind: str = "infinite_temperature"
    direction: tuple = (0.0, 0.0, 1.0)  # for "aligned"
    path: Optional[str] = None  # for "from_checkpoint"

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ConfigError(f"unknown init kind {self.kind!r}")
        if self.kind == "aligned":
            d = np.asarray(self.direction, dtype=np.float64)
            if d.shape != (3,) or not np.all(np.isfinite(d)) or np.linalg.norm(d) == 0:
                raise ConfigError(f"aligned init needs a nonzero 3-vector, got {self.direction}")
            object.__setattr__(self, "direction", tuple(float(x) for x in d))
        if self.kind == "from_checkpoint" and not self.path:
            raise ConfigError("from_checkpoint init requires a path")


@dataclass(frozen=True)
class StopRules:
    target_sz: Optional[float] = None  # stop once M_z/N passes this (steering direction)
    halt_on_tracking_lost: bool = False


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeSpec
    t_end: float
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    telemetry_interval: Optional[float] = None  # default: one drive period 2*pi/omega(0)
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    stop_rules: StopRules = field(default_factory=StopRules)
    field_method: str = "auto"
    checkpoint_interval: float = 0.0  # time units; 0 = final checkpoint only

    def __post_init__(self):
        if not (self.t_end > 0):
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must fit an unsigned 64-bit integer")
        if self.telemetry_interval is not None and self.telemetry_interval < self.integrator.dt:
            raise ConfigError("telemetry_interval must be >= integrator dt")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval must be >= 0")

    def resolved_telemetry_interval(self) -> float:
        if self.telemetry_interval is not None:
            return self.telemetry_interval
        return 2.0 * math.pi / self.feedback.omega(0.0)


@dataclass
class RunResult:
    final_state_path: Optional[str]
    telemetry_path: Optional[str]
    final_sz: float
    max_abs_g: float
    tracking_lost_at: Optional[float]
    wall_time: float
    t_final: float
    steps: int
    target_reached_at: Optional[float] = None
    max_abs_g_tracking: float = 0.0
    halted_on_tracking: bool = False

    def as_dict(self) -> dict:
        return {
            "final_state_path": self.final_state_path,
            "telemetry_path": self.telemetry_path,
            "final_sz": self.final_sz,
            "max_abs_g": self.max_abs_g,
            "max_abs_g_tracking": self.max_abs_g_tracking,
            "tracking_lost_at": self.tracking_lost_at,
            "halted_on_tracking": self.halted_on_tracking,
            "target_reached_at": self.target_reached_at,
            "wall_time": self.wall_time,
            "t_final": self.t_final,
            "steps": self.steps,
        }


def sample_infinite_temperature(n: int, rng: np.random.Generator) -> SpinState:
    """N spins independently uniform on the unit sphere at t = 0.

    Draw order (documented for seed portability): n uniform doubles mapped to
    z in [-1, 1], then n uniform doubles mapped to the azimuth in [0, 2*pi).
    """
    if n < 1:
        raise ConfigError("need at least one spin")
    z = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    rho = np.sqrt(1.0 - z * z)
    spins = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return SpinState(spins, 0.0)


def aligned_state(n: int, direction) -> SpinState:
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    return SpinState(np.tile(d, (n, 1)), 0.0)


def _rng_children(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    root = np.random.SeedSequence(int(seed))
    init_ss, det_ss = root.spawn(2)
    return (
        np.random.Generator(np.random.Philox(init_ss)),
        np.random.Generator(np.random.Philox(det_ss)),
    )


# ---------------------------------------------------------------------------
# Checkpoint I/O: one JSON line (utf-8, newline-terminated) followed by the
# spin array as little-endian float64, shape (N, 3), C order.
# ---------------------------------------------------------------------------


def write_checkpoint(
    path, config: RunConfig, spins: np.ndarray, step: int, t: float, detector_state=None
) -> str:
    from .config import config_to_dict

    header = {
        "format": CHECKPOINT_FORMAT,
        "config": config_to_dict(config),
        "seed": int(config.seed),
        "step": int(step),
        "t": float(t),
        "n_spins": int(spins.shape[0]),
    }
    if detector_state is not None:
        header["detector_state"] = detector_state
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(spins, dtype="<f8").tobytes())
    return str(path)


def read_checkpoint(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"not a spincool checkpoint: {path}") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"unsupported checkpoint format in {path}")
    n = int(header["n_spins"])
    expected = n * 3 * 8
    if len(blob) != expected:
        raise ConfigError(f"checkpoint {path} payload is {len(blob)} bytes, expected {expected}")
    spins = np.frombuffer(blob, dtype="<f8").astype(np.float64).reshape(n, 3)
    return header, spins


class TelemetryWriter:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", buffering=1 << 16)
        self._fh.write(TelemetryRecord.CSV_HEADER + "\n")

    def emit(self, rec: TelemetryRecord) -> None:
        self._fh.write(rec.csv_row() + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# ---------------------------------------------------------------------------
# The run loop
# ---------------------------------------------------------------------------


def _initial_state(config: RunConfig, init_rng) -> tuple[np.ndarray, int, Optional[dict]]:
    """Returns (spins, global step, detector state or None)."""
    n = config.lattice.n_sites
    kind = config.init.kind
    if kind == "infinite_temperature":
        return sample_infinite_temperature(n, init_rng).spins, 0, None
    if kind == "aligned":
        return aligned_state(n, config.init.direction).spins, 0, None
    header, spins = read_checkpoint(config.init.path)
    if spins.shape[0] != n:
        raise ConfigError(
            f"checkpoint has {spins.shape[0]} spins, lattice expects {n}"
        )
    ck_dims = header["config"]["lattice"]["dims"]
    if tuple(ck_dims) != config.lattice.dims:
        raise ConfigError(f"checkpoint lattice dims {ck_dims} != config dims {list(config.lattice.dims)}")
    return spins.copy(), int(header["step"]), header.get("detector_state")


def _target_reached(sz: float, target: float) -> bool:
    return sz <= target if target <= 0 else sz >= target


class _PythonDriver:
    """Step loop in numpy; handles every scheme, backend, and detector."""

    def __init__(self, config, evaluator, detector):
        self.cfg = config
        self.ev = evaluator
        self.detector = detector
        self.dt = config.integrator.dt
        self.fb = config.feedback
        self.gmax = 0.0
        self._stepper = rk4_step if config.integrator.scheme == "rk4_renorm" else splitting_step

    def _provider(self, t: float, spins: np.ndarray) -> np.ndarray:
        mz = float(np.sum(spins[:, 2]))
        measured = self.detector.measure(mz, t)
        g = g_of_t(self.fb, t, measured)
        ag = abs(g)
        if ag > self.gmax:
            self.gmax = ag
        return self.ev.fields(spins, g, self.fb.hz)

    def advance(self, spins: np.ndarray, step0: int, nsteps: int):
        dt = self.dt
        for j in range(nsteps):
            t = (step0 + j) * dt
            spins = self._stepper(spins, t, dt, self._provider)
            if not np.all(np.isfinite(spins)):
                return spins, j, False
        return spins, nsteps, True


class _FusedDriver:
    """Compiled rk4 loop; requires direct backend, ideal detector, constant
    g0/omega schedules."""

    def __init__(self, config, table: CouplingTable):
        jz, jp = table.pair_matrices()
        self.jz = jz
        self.jp = jp
        self.ratio = table.ratio_exact
        self.dt = config.integrator.dt
        fb = config.feedback
        self.g0 = fb.g0.constant_value
        self.omega = fb.omega.constant_value
        self.hz = fb.hz
        self.steer_args = fb.steering.kernel_args()
        self.gmax = 0.0

    def advance(self, spins: np.ndarray, step0: int, nsteps: int):
        sx = np.ascontiguousarray(spins[:, 0])
        sy = np.ascontiguousarray(spins[:, 1])
        sz = np.ascontiguousarray(spins[:, 2])
        kind, fdot, df, dt_step, tt, tf = self.steer_args
        gmax, done, ok = _kernels.rk4_feedback_chunk(
            sx, sy, sz, self.jz, self.jp, self.ratio,
            self.dt, step0, nsteps,
            self.g0, self.omega, self.hz,
            kind, fdot, df, dt_step, tt, tf,
        )
        if gmax > self.gmax:
            self.gmax = gmax
        out = np.column_stack([sx, sy, sz])
        return out, int(done), bool(ok)


def _select_driver(config: RunConfig, table: CouplingTable, evaluator, detector):
    fused_ok = (
        config.integrator.scheme == "rk4_renorm"
        and evaluator.method == "direct"
        and config.feedback.detector.is_ideal
        and config.feedback.constant_drive_params
    )
    if fused_ok:
        return _FusedDriver(config, table)
    return _PythonDriver(config, evaluator, detector)


def run(
    config: RunConfig,
    out_dir=None,
    sink: Optional[Callable[[TelemetryRecord], None]] = None,
) -> RunResult:
    """Execute a full run; see module docstring for the determinism contract.

    Writes telemetry.csv plus a final checkpoint into out_dir when given.
    Raises SimulationAbort on a non-finite state (after checkpointing the last
    good state). Tracking loss never raises: the result carries
    tracking_lost_at and halted_on_tracking for the caller to act on.
    """
    t_start_wall = time.perf_counter()
    table = build_couplings(config.lattice)
    init_rng, det_rng = _rng_children(config.seed)
    detector = Detector(config.feedback.detector, det_rng)

    spins, step0, det_state = _initial_state(config, init_rng)
    if det_state is not None:
        detector.load_state(det_state)
    resumed = config.init.kind == "from_checkpoint"

    evaluator = get_evaluator(table, config.field_method)
    if evaluator.method == "fft" and table.n_sites <= SELF_TEST_MAX_SITES:
        _fft_self_test(table, spins, config.feedback.hz)

    dt = config.integrator.dt
    n = table.n_sites
    n_steps_total = int(math.ceil(config.t_end / dt - 1e-9))
    if step0 >= n_steps_total:
        raise ConfigError(
            f"checkpoint is already at step {step0} (t={step0 * dt:.6g}); nothing to run"
        )
    emit_every = max(1, int(round(config.resolved_telemetry_interval() / dt)))
    ck_every = 0
    if config.checkpoint_interval > 0:
        ck_every = max(emit_every, int(round(config.checkpoint_interval / dt)))

    _advisory_dt_check(config, evaluator, detector, spins, step0 * dt)

    driver = _select_driver(config, table, evaluator, detector)
    guard = config.feedback.guard_factor * math.sqrt(n)
    rules = config.stop_rules

    writer = None
    telemetry_path = None
    final_ckpt_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = TelemetryWriter(out_dir / "telemetry.csv")
        telemetry_path = str(out_dir / "telemetry.csv")

    def emit(step: int, spins_now: np.ndarray) -> TelemetryRecord:
        t = step * dt
        state = SpinState(spins_now, t)
        mx, my, mz = collective(state)
        fval = f_of_t(config.feedback.steering, t)
        # Diagnostic drive value at the emission instant, computed from the
        # true M_z so that telemetry never consumes detector randomness.
        gval = g_of_t(config.feedback, t, mz)
        e = evaluator.interaction_energy(spins_now)
        if config.feedback.hz != 0.0:
            e += config.feedback.hz * mz
        rec = TelemetryRecord(t=t, mx=mx, my=my, mz=mz, f=fval, g=gval, e=e)
        if writer is not None:
            writer.emit(rec)
        if sink is not None:
            sink(rec)
        return rec

    tracking_lost_at: Optional[float] = None
    halted_on_tracking = False
    target_reached_at: Optional[float] = None
    gmax_tracking = 0.0
    last_good = spins.copy()
    last_good_step = step0
    step = step0

    try:
        if not resumed:
            emit(step, spins)
        next_ck = step + ck_every if ck_every else None
        while step < n_steps_total:
            # advance to the next emission point on the global step grid
            block = min(emit_every - step % emit_every, n_steps_total - step)
            spins, done, ok = driver.advance(spins, step, block)
            step += done
            if not ok or not np.all(np.isfinite(spins)):
                ck = None
                if out_dir is not None:
                    ck = write_checkpoint(
                        out_dir / "abort.ckpt", config, last_good, last_good_step,
                        last_good_step * dt, detector.state_dict() if not detector.model.is_ideal else None,
                    )
                raise SimulationAbort(
                    f"non-finite state at t={step * dt:.6g}", checkpoint_path=ck, t=step * dt
                )
            rec = emit(step, spins)
            last_good = spins.copy()
            last_good_step = step
            if tracking_lost_at is None:
                if abs(rec.f - rec.mz) > guard:
                    tracking_lost_at = rec.t
                    if rules.halt_on_tracking_lost:
                        halted_on_tracking = True
                        break
                else:
                    gmax_tracking = driver.gmax
            if rules.target_sz is not None and target_reached_at is None:
                if _target_reached(rec.mz / n, rules.target_sz):
                    target_reached_at = rec.t
                    break
            if next_ck is not None and step >= next_ck:
                write_checkpoint(
                    out_dir / f"ckpt_{step:012d}.ckpt", config, spins, step, step * dt,
                    detector.state_dict() if not detector.model.is_ideal else None,
                )
                next_ck += ck_every
    finally:
        if writer is not None:
            writer.close()

    if out_dir is not None:
        final_ckpt_path = write_checkpoint(
            out_dir / "final.ckpt", config, spins, step, step * dt,
            detector.state_dict() if not detector.model.is_ideal else None,
        )

    mz_final = float(np.sum(spins[:, 2]))
    return RunResult(
        final_state_path=final_ckpt_path,
        telemetry_path=telemetry_path,
        final_sz=mz_final / n,
        max_abs_g=driver.gmax,
        tracking_lost_at=tracking_lost_at,
        wall_time=time.perf_counter() - t_start_wall,
        t_final=step * dt,
        steps=step,
        target_reached_at=target_reached_at,
        max_abs_g_tracking=gmax_tracking,
        halted_on_tracking=halted_on_tracking,
    )


def resume(checkpoint_path, overrides: Optional[dict] = None, out_dir=None, sink=None) -> RunResult:
    """Continue a checkpointed run; bit-exact when no overrides are given.

    ``overrides`` is a partial config-file dict merged over the stored config.
    Changing the lattice is rejected.
    """
    from .config import config_from_dict, config_to_dict, merge_config_dicts

    header, _ = read_checkpoint(checkpoint_path)
    stored = header["config"]
    merged = merge_config_dicts(stored, overrides or {})
    if merged["lattice"]["dims"] != stored["lattice"]["dims"]:
        raise ConfigError("resume cannot change lattice dims")
    merged["run"]["init"] = {"kind": "from_checkpoint", "path": str(checkpoint_path)}
    config = config_from_dict(merged)
    return run(config, out_dir=out_dir, sink=sink)


def _fft_self_test(table: CouplingTable, spins: np.ndarray, hz: float) -> None:
    """Startup equivalence check of the FFT path against the direct sum."""
    fft_ev = get_evaluator(table, "fft")
    direct_ev = get_evaluator(table, "direct")
    a = fft_ev.fields(spins, 0.3, hz)
    b = direct_ev.fields(spins, 0.3, hz)
    err = float(np.max(np.abs(a - b)))
    if err > SELF_TEST_TOL:
        raise SimulationAbort(
            f"FFT field path disagrees with direct sum by {err:.3e} (tol {SELF_TEST_TOL:.1e})"
        )


def _advisory_dt_check(config, evaluator, detector, spins, t0) -> None:
    # advisory only; uses the true M_z so no detector randomness is consumed
    mz = float(np.sum(spins[:, 2]))
    g = g_of_t(config.feedback, t0, mz)
    with np.errstate(over="ignore", invalid="ignore"):
        h = evaluator.fields(spins, g, config.feedback.hz)
        hmax = float(np.max(np.sqrt(np.sum(h * h, axis=1))))
    if config.integrator.dt * hmax > 0.25:
        warnings.warn(
            f"dt * max|h| = {config.integrator.dt * hmax:.3g} is not small; "
            "consider a smaller time step",
            stacklevel=2,
        )
