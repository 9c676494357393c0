"""Spin state, local-field evaluation, energy, and norm-preserving integrators.

The equations of motion are dS_m/dt = S_m x h_m with h_m = -dH/dS_m:

    h_m^x = -(sum_n jperp_mn S_n^x + g)
    h_m^y = - sum_n jperp_mn S_n^y
    h_m^z = -(sum_n jz_mn   S_n^z + h_z)

Sign convention pinned by the exact-precession case S=(1,0,0), h=(0,0,1):
after time pi/2 the spin points along (0,-1,0).

Two field backends: a compiled direct O(N^2) sum and an FFT periodic
convolution (couplings depend only on displacement). Both are
single-threaded and bit-deterministic; "auto" picks FFT from N >= 512.

Two integrators: ``rk4_renorm`` (classic RK4 with per-step renormalization;
the drive is re-evaluated at each stage with the stage state's M_z) and
``rotation_splitting`` (Strang splitting of H into its x/y/z interaction
parts plus the drive; each part has a constant-field exact flow, so the step
is a composition of exact rotations: norm-exact, symplectic and
time-reversible).
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from . import _kernels
from .errors import ConfigError, SimulationAbort
from .lattice import CouplingTable

# A field provider maps (t, spins (N,3)) -> fields (N,3).
FieldProvider = Callable[[float, np.ndarray], np.ndarray]

FieldArray = np.ndarray  # alias: (N, 3) float64, local field at each site

INTEGRATOR_SCHEMES = ("rk4_renorm", "rotation_splitting")
FIELD_METHODS = ("auto", "direct", "fft")
FFT_THRESHOLD = 512  # sites; direct wins below, convolution above


@dataclass
class SpinState:
    """N unit spins plus the simulation clock (inverse-coupling time units)."""

    spins: np.ndarray  # (N, 3) float64
    t: float = 0.0

    def __post_init__(self):
        self.spins = np.ascontiguousarray(self.spins, dtype=np.float64)
        if self.spins.ndim != 2 or self.spins.shape[1] != 3:
            raise ConfigError(f"spins must have shape (N, 3), got {self.spins.shape}")

    @property
    def n_spins(self) -> int:
        return self.spins.shape[0]

    def copy(self) -> "SpinState":
        return SpinState(self.spins.copy(), self.t)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.spins * self.spins, axis=1))

    def max_norm_error(self) -> float:
        return float(np.max(np.abs(self.norms() - 1.0)))

    def validate(self, tol: float = 1e-9) -> None:
        if not np.all(np.isfinite(self.spins)):
            raise ConfigError("spin state contains non-finite entries")
        err = self.max_norm_error()
        if err > tol:
            raise ConfigError(f"spin norms off unit sphere by {err:.3e} (tol {tol:.1e})")


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4_renorm"
    dt: float = 0.01

    def __post_init__(self):
        if self.scheme not in INTEGRATOR_SCHEMES:
            raise ConfigError(f"unknown integrator scheme {self.scheme!r}")
        if not (self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")


class FieldEvaluator:
    """Field/energy engine bound to one coupling table and one backend."""

    def __init__(self, table: CouplingTable, method: str = "auto"):
        if method not in FIELD_METHODS:
            raise ConfigError(f"unknown field method {method!r}")
        if method == "auto":
            method = "fft" if (table.has_kernel and table.n_sites >= FFT_THRESHOLD) else "direct"
        if method == "fft" and not table.has_kernel:
            raise ConfigError("FFT field path requires a periodic lattice")
        self.table = table
        self.method = method
        self.dims = table.dims
        self.n = table.n_sites
        if method == "fft":
            self._khat_z = np.fft.rfftn(table.jz_kernel)
            self._khat_p = np.fft.rfftn(table.jperp_kernel)
        else:
            jz, jp = table.pair_matrices()
            self._jz_mat = jz
            self._jp_mat = jp
            self._ratio = table.ratio_exact

    def fields(self, spins: np.ndarray, g: float, hz: float) -> FieldArray:
        """Local fields for every site; deterministic fixed-order sums."""
        if spins.shape[0] != self.n:
            raise ConfigError(
                f"state has {spins.shape[0]} spins but lattice has {self.n} sites"
            )
        if self.method == "direct":
            sx = np.ascontiguousarray(spins[:, 0])
            sy = np.ascontiguousarray(spins[:, 1])
            sz = np.ascontiguousarray(spins[:, 2])
            out = np.empty_like(spins)
            hx = np.empty(self.n)
            hy = np.empty(self.n)
            hzv = np.empty(self.n)
            _kernels.direct_fields(
                self._jz_mat, self._jp_mat, self._ratio, sx, sy, sz, g, hz, hx, hy, hzv
            )
            out[:, 0] = hx
            out[:, 1] = hy
            out[:, 2] = hzv
            return out
        conv = self._convolve(spins)
        out = np.empty_like(spins)
        out[:, 0] = -(conv[0].ravel() + g)
        out[:, 1] = -conv[1].ravel()
        out[:, 2] = -(conv[2].ravel() + hz)
        return out

    def _convolve(self, spins: np.ndarray) -> np.ndarray:
        """Circular convolution of each spin component with its kernel."""
        grid = np.empty((3,) + self.dims)
        for c in range(3):
            grid[c] = spins[:, c].reshape(self.dims)
        shat = np.fft.rfftn(grid, axes=(1, 2, 3))
        shat[0] *= self._khat_p
        shat[1] *= self._khat_p
        shat[2] *= self._khat_z
        return np.fft.irfftn(shat, s=self.dims, axes=(1, 2, 3))

    def interaction_energy(self, spins: np.ndarray) -> float:
        """Pair part of H0 (no Zeeman term).

        einsum (not BLAS dot) keeps the reduction order fixed regardless of
        thread settings; the value feeds telemetry, which must be
        byte-reproducible.
        """
        if self.method == "direct":
            sx, sy, sz = spins[:, 0], spins[:, 1], spins[:, 2]
            exy = np.einsum("i,ij,j->", sx, self._jp_mat, sx) + np.einsum(
                "i,ij,j->", sy, self._jp_mat, sy
            )
            ez = np.einsum("i,ij,j->", sz, self._jz_mat, sz)
            return 0.5 * float(exy + ez)
        conv = self._convolve(spins)
        acc = 0.0
        for c in range(3):
            acc += float(np.einsum("i,i->", spins[:, c], conv[c].ravel()))
        return 0.5 * acc


_EVALUATORS: "weakref.WeakKeyDictionary[CouplingTable, dict]" = weakref.WeakKeyDictionary()


def get_evaluator(table: CouplingTable, method: str = "auto") -> FieldEvaluator:
    """Memoized FieldEvaluator per (table, method)."""
    per_table = _EVALUATORS.setdefault(table, {})
    if method not in per_table:
        per_table[method] = FieldEvaluator(table, method)
    return per_table[method]


def local_fields(
    state: SpinState, table: CouplingTable, drive: float, hz: float = 0.0, method: str = "auto"
) -> FieldArray:
    """Local field h_m = -dH/dS_m at every site for drive amplitude g."""
    return get_evaluator(table, method).fields(state.spins, drive, hz)


def energy(state: SpinState, table: CouplingTable, hz: float = 0.0, method: str = "auto") -> float:
    """H0 on the state: pair couplings plus the optional h_z sum_m S_m^z term."""
    ev = get_evaluator(table, method)
    e = ev.interaction_energy(state.spins)
    if hz != 0.0:
        e += hz * float(np.sum(state.spins[:, 2]))
    return e


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def rk4_step(spins: np.ndarray, t: float, dt: float, provider: FieldProvider) -> np.ndarray:
    """One RK4 step of dS/dt = S x h, spins renormalized afterwards.

    The provider is called at the four stage times with the stage states, so a
    feedback drive sees each stage's own M_z. dt may be negative.
    """
    k1 = _cross(spins, provider(t, spins))
    y = spins + (0.5 * dt) * k1
    k2 = _cross(y, provider(t + 0.5 * dt, y))
    y = spins + (0.5 * dt) * k2
    k3 = _cross(y, provider(t + 0.5 * dt, y))
    y = spins + dt * k3
    k4 = _cross(y, provider(t + dt, y))
    new = spins + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    norms = np.sqrt(np.sum(new * new, axis=1))
    new /= norms[:, None]
    return new


def _rotate_component(spins: np.ndarray, axis: int, phi: np.ndarray) -> None:
    """Rotate every spin about coordinate axis ``axis`` by its angle, in place."""
    c = np.cos(phi)
    s = np.sin(phi)
    u = (axis + 1) % 3
    v = (axis + 2) % 3
    su = spins[:, u].copy()
    sv = spins[:, v]
    spins[:, u] = c * su - s * sv
    spins[:, v] = s * su + c * sv


# Strang palindrome: half-kicks of the z and y parts around a full x kick.
_SPLIT_PARTS = ((2, 0.5), (1, 0.5), (0, 1.0), (1, 0.5), (2, 0.5))


def splitting_step(spins: np.ndarray, t: float, dt: float, provider: FieldProvider) -> np.ndarray:
    """One rotation-splitting step.

    H is split into its x, y and z parts (the drive rides on the x part via
    the provider). Each part's field component is frozen under its own flow,
    so the flow is an exact per-spin rotation about that axis; the palindromic
    composition is second order, time-reversible and norm-exact. Field
    components are re-evaluated from the partially updated state; the drive is
    evaluated at the step midpoint. dt may be negative (exact reversal).
    """
    new = spins.copy()
    t_mid = t + 0.5 * dt
    for axis, frac in _SPLIT_PARTS:
        h = provider(t_mid, new)
        phi = -h[:, axis] * (frac * dt)
        _rotate_component(new, axis, phi)
    return new


def step(state: SpinState, cfg: IntegratorConfig, provider: FieldProvider) -> SpinState:
    """Advance one time step under the configured scheme.

    Raises SimulationAbort when the updated state is non-finite.
    """
    if cfg.scheme == "rk4_renorm":
        new = rk4_step(state.spins, state.t, cfg.dt, provider)
    else:
        new = splitting_step(state.spins, state.t, cfg.dt, provider)
    if not np.all(np.isfinite(new)):
        raise SimulationAbort("non-finite spin state after step", t=state.t + cfg.dt)
    return SpinState(new, state.t + cfg.dt)


def constant_field_provider(table: CouplingTable, g: float, hz: float, method: str = "auto") -> FieldProvider:
    """Provider for a fixed drive amplitude (g(t) = const)."""
    ev = get_evaluator(table, method)

    def provider(t: float, spins: np.ndarray) -> np.ndarray:
        return ev.fields(spins, g, hz)

    return provider
