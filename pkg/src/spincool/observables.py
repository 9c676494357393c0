"""Collective observables, fluctuation statistics, T2 estimate, and the
feasibility conditions for the feedback-cooling scheme.

The three conditions, with effective step dt_eff = 2*pi/omega:

  (i)   the steering jump |fdot| * dt_eff must be smaller than the capturable
        fluctuation gain sigma_My^2 / (2 * max(|M_z|, sigma_My));
  (ii)  dt_eff should be at least the transverse correlation time T2, so each
        step finds a fresh fluctuation to convert;
  (iii) the drive must be strong enough: rho = g0 * sqrt(N) / omega of order
        one (accepted band [0.1, 10], raw ratio always reported).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .dynamics import SpinState


@dataclass(frozen=True)
class TelemetryRecord:
    """One telemetry sample: collective polarizations, drive, and energy."""

    t: float
    mx: float
    my: float
    mz: float
    f: float
    g: float
    e: float

    CSV_HEADER = "t,mx,my,mz,f,g,e"

    def csv_row(self) -> str:
        return (
            f"{self.t:.17g},{self.mx:.17g},{self.my:.17g},{self.mz:.17g},"
            f"{self.f:.17g},{self.g:.17g},{self.e:.17g}"
        )


def collective(state: SpinState) -> Tuple[float, float, float]:
    """(M_x, M_y, M_z): componentwise sums over all spins, fixed order."""
    s = state.spins
    return float(np.sum(s[:, 0])), float(np.sum(s[:, 1])), float(np.sum(s[:, 2]))


def transverse_variance(samples: Sequence[float]) -> float:
    """Unbiased sample variance of a collection of M_y values."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("need at least 2 samples for a variance")
    return float(np.var(arr, ddof=1))


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation C_k = <y_i y_{i+k}> / <y^2>, k = 0..max_lag.

    Unbiased lag sums computed via FFT; no mean subtraction (the transverse
    polarization has zero mean at equilibrium).
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.size
    padded = np.zeros(2 * n)
    padded[:n] = y
    spec = np.fft.rfft(padded)
    raw = np.fft.irfft(spec * np.conj(spec))[: max_lag + 1]
    counts = n - np.arange(max_lag + 1)
    c = raw / counts
    return c / c[0]


def estimate_t2(
    series: Sequence[Tuple[float, float]] | np.ndarray, method: str = "one_over_e"
) -> float:
    """Correlation time of a uniformly sampled equilibrium M_y series.

    one_over_e: first lag where C crosses 1/e, linearly interpolated.
    integral: integral of C out to its first zero crossing (or to the lag cap
    of half the series when C never crosses zero).
    """
    if method not in ("one_over_e", "integral"):
        raise ValueError(f"unknown T2 method {method!r}")
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be pairs of (t, my)")
    n = arr.shape[0]
    if n < 8:
        raise ValueError("series too short for a T2 estimate")
    ts, ys = arr[:, 0], arr[:, 1]
    dts = np.diff(ts)
    dt = dts[0]
    if dt <= 0 or not np.allclose(dts, dt, rtol=1e-6, atol=1e-12):
        raise ValueError("series must be uniformly sampled")
    if not np.any(ys != 0.0):
        raise ValueError("series is identically zero")

    max_lag = n // 2
    c = autocorrelation(ys, max_lag)

    if method == "one_over_e":
        threshold = 1.0 / math.e
        below = np.nonzero(c <= threshold)[0]
        if below.size == 0:
            raise ValueError("series too short: autocorrelation never reaches 1/e")
        k = int(below[0])
        # c[0] = 1 > threshold, so k >= 1 and we can interpolate.
        frac = (c[k - 1] - threshold) / (c[k - 1] - c[k])
        return float((k - 1 + frac) * dt)

    negative = np.nonzero(c < 0.0)[0]
    if negative.size > 0:
        k = int(negative[0])
        frac = c[k - 1] / (c[k - 1] - c[k])
        tau_cut = (k - 1 + frac) * dt
        grid = np.arange(k) * dt
        total = float(np.trapezoid(c[:k], grid))
        # triangle from the last positive sample down to the crossing
        total += 0.5 * c[k - 1] * (tau_cut - grid[-1])
        return float(total)
    return float(np.trapezoid(c, np.arange(max_lag + 1) * dt))


@dataclass(frozen=True)
class ConditionReport:
    """Quantitative evaluation of feasibility conditions (i)-(iii)."""

    delta_f: float  # steering change per effective step dt_eff = 2*pi/omega
    fluct_gain: float  # sigma_My^2 / (2 * max(|mz|, sigma_My))
    cond_i: bool
    ratio_ii: float  # dt_eff / T2
    cond_ii: bool
    rho_iii: float  # g0 * sqrt(N) / omega
    cond_iii: bool
    notes: List[str] = field(default_factory=list)

    @property
    def all_satisfied(self) -> bool:
        return self.cond_i and self.cond_ii and self.cond_iii

    def as_dict(self) -> dict:
        return {
            "delta_f": self.delta_f,
            "fluct_gain": self.fluct_gain,
            "cond_i": self.cond_i,
            "ratio_ii": self.ratio_ii,
            "cond_ii": self.cond_ii,
            "rho_iii": self.rho_iii,
            "cond_iii": self.cond_iii,
            "all_satisfied": self.all_satisfied,
            "notes": list(self.notes),
        }


RHO_BAND = (0.1, 10.0)


def infinite_temperature_sigma_my(n_spins: int) -> float:
    """Analytic transverse fluctuation scale sqrt(N/3) of the uniform-sphere
    ensemble (<(S^y)^2> = 1/3 per spin)."""
    return math.sqrt(n_spins / 3.0)


def check_conditions(
    n_spins: int,
    mz: float,
    sigma_my: float,
    fdot: float,
    omega: float,
    g0: float,
    t2: float,
) -> ConditionReport:
    """Evaluate feasibility conditions (i)-(iii) for a parameter set.

    sigma_my may be a measured value or the analytic infinite-temperature
    estimate sqrt(N/3). Near zero polarization the condition-(i) denominator
    is clamped to sigma_my (the capturable fluctuation is then sigma itself).
    """
    if n_spins < 1:
        raise ValueError("n_spins must be positive")
    if omega <= 0 or t2 <= 0:
        raise ValueError("omega and t2 must be positive")
    if sigma_my < 0:
        raise ValueError("sigma_my must be non-negative")

    dt_eff = 2.0 * math.pi / omega
    delta_f = fdot * dt_eff
    denom = 2.0 * max(abs(mz), sigma_my)
    fluct_gain = (sigma_my * sigma_my / denom) if denom > 0 else 0.0
    cond_i = abs(delta_f) < fluct_gain

    ratio_ii = dt_eff / t2
    cond_ii = ratio_ii >= 1.0

    rho = g0 * math.sqrt(n_spins) / omega
    cond_iii = RHO_BAND[0] <= rho <= RHO_BAND[1]

    notes = []
    if abs(mz) > 0 and sigma_my >= 0.3 * abs(mz):
        notes.append(
            "small-angle proxy sigma_My/|M_z| is unreliable here (|dMy| not << |M_z|)"
        )
    if sigma_my >= abs(mz):
        notes.append("condition (i) denominator clamped to sigma_My (|M_z| below noise)")

    return ConditionReport(
        delta_f=delta_f,
        fluct_gain=fluct_gain,
        cond_i=cond_i,
        ratio_ii=ratio_ii,
        cond_ii=cond_ii,
        rho_iii=rho,
        cond_iii=cond_iii,
        notes=notes,
    )
