"""Collective observables, autocorrelation/T2, and the condition checker."""

import math

import numpy as np
import pytest

from spincool.dynamics import SpinState
from spincool.experiment import sample_infinite_temperature
from spincool.observables import (
    TelemetryRecord,
    check_conditions,
    collective,
    estimate_t2,
    infinite_temperature_sigma_my,
    transverse_variance,
)


def test_collective_aligned():
    st = SpinState(np.tile([0.0, 0.0, 1.0], (1000, 1)))
    assert collective(st) == (0.0, 0.0, 1000.0)
    st = SpinState(np.tile([0.0, 0.0, -1.0], (1000, 1)))
    assert collective(st)[2] == -1000.0  # fully polarized down


def test_collective_antiparallel_pair():
    st = SpinState(np.array([[0.3, -0.4, 0.5], [-0.3, 0.4, -0.5]]) / math.sqrt(0.5))
    mx, my, mz = collective(st)
    assert (mx, my, mz) == (0.0, 0.0, 0.0)


def test_collective_single_flip_linearity():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(64, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    st = SpinState(s.copy())
    _, _, mz = collective(st)
    s2 = s.copy()
    s2[17, 2] = -s2[17, 2]  # flip one z-component
    _, _, mz2 = collective(SpinState(s2))
    assert mz2 - mz == pytest.approx(-2.0 * s[17, 2], rel=1e-12)


def test_transverse_variance_constant_is_zero():
    assert transverse_variance([3.3] * 10) == 0.0


def test_transverse_variance_needs_two():
    with pytest.raises(ValueError):
        transverse_variance([1.0])


@pytest.mark.parametrize("n,rel_tol", [(1000, 0.05), (100, 0.10)])
def test_infinite_temperature_my_variance(n, rel_tol):
    # Monte Carlo oracle: <(S^y)^2> = 1/3 on the uniform sphere -> Var(M_y) = N/3
    rng = np.random.Generator(np.random.Philox(2024))
    samples = []
    for _ in range(10_000):
        st = sample_infinite_temperature(n, rng)
        samples.append(float(np.sum(st.spins[:, 1])))
    var = transverse_variance(samples)
    assert var == pytest.approx(n / 3.0, rel=rel_tol)


# ---------------------------------------------------------------------------
# T2 estimation
# ---------------------------------------------------------------------------


def ar1_series(tau, dt, n, seed):
    """Stationary AR(1) whose autocorrelation is exp(-k dt / tau)."""
    rho = math.exp(-dt / tau)
    rng = np.random.default_rng(seed)
    y = np.empty(n)
    y[0] = rng.standard_normal()
    innov = math.sqrt(1.0 - rho * rho) * rng.standard_normal(n - 1)
    for i in range(1, n):
        y[i] = rho * y[i - 1] + innov[i - 1]
    t = np.arange(n) * dt
    return np.column_stack([t, y])


def test_t2_one_over_e_on_exponential_series():
    series = ar1_series(tau=0.5, dt=0.01, n=200_000, seed=11)
    t2 = estimate_t2(series, method="one_over_e")
    assert t2 == pytest.approx(0.5, abs=0.03)


def test_t2_integral_on_exponential_series():
    # integral of exp(-tau/t0) to the first (noise-induced) zero crossing ~ t0
    series = ar1_series(tau=0.5, dt=0.01, n=200_000, seed=12)
    t2 = estimate_t2(series, method="integral")
    assert t2 == pytest.approx(0.5, rel=0.2)


def test_t2_white_noise_is_one_sample():
    rng = np.random.default_rng(13)
    n = 50_000
    series = np.column_stack([np.arange(n) * 0.01, rng.standard_normal(n)])
    t2 = estimate_t2(series, method="one_over_e")
    assert t2 < 1.5 * 0.01


def test_t2_amplitude_invariance():
    series = ar1_series(tau=0.5, dt=0.01, n=50_000, seed=14)
    scaled = series.copy()
    scaled[:, 1] *= 173.0
    a = estimate_t2(series)
    b = estimate_t2(scaled)
    assert a == pytest.approx(b, rel=1e-12)


def test_t2_input_validation():
    with pytest.raises(ValueError):
        estimate_t2(np.zeros((4, 2)))  # too short
    bad = np.column_stack([np.array([0.0, 0.1, 0.3, 0.35, 0.5, 0.6, 0.7, 0.8]), np.ones(8)])
    with pytest.raises(ValueError):
        estimate_t2(bad)  # non-uniform sampling
    with pytest.raises(ValueError):
        estimate_t2(ar1_series(0.5, 0.01, 100, 1), method="banana")


# ---------------------------------------------------------------------------
# condition checker
# ---------------------------------------------------------------------------


def paper_report(**kw):
    return check_conditions(
        n_spins=kw.get("n_spins", 1000),
        mz=kw.get("mz", -500.0),
        sigma_my=kw.get("sigma_my", math.sqrt(1000 / 3.0)),
        fdot=kw.get("fdot", -0.005),
        omega=kw.get("omega", 7.0),
        g0=kw.get("g0", 0.2),
        t2=kw.get("t2", 1.0 / 3.0),
    )


def test_paper_parameters_pass_all_conditions():
    rep = paper_report()
    assert rep.all_satisfied
    assert rep.rho_iii == pytest.approx(0.90, abs=0.01)


def test_condition_i_violated_by_fast_steering():
    rep = paper_report(fdot=-10.0)
    assert not rep.cond_i
    assert rep.cond_ii and rep.cond_iii


def test_condition_ii_violated_by_fast_drive():
    rep = paper_report(omega=100.0)
    # dt_eff = 2 pi / 100 ~ 0.063 < T2 = 1/3
    assert not rep.cond_ii


def test_condition_iii_band():
    assert not paper_report(g0=1e-4).cond_iii
    assert not paper_report(g0=50.0).cond_iii


def test_checker_monotonicity():
    # decreasing |fdot| never turns (i) true -> false
    prev = None
    for fdot in [-2.0, -1.0, -0.1, -0.01, -0.001]:
        ok = paper_report(fdot=fdot).cond_i
        if prev is not None and prev:
            assert ok
        prev = ok
    # increasing t2 never turns (ii) false -> true at fixed omega
    prev = None
    for t2 in [0.01, 0.1, 1.0, 10.0]:
        ok = paper_report(t2=t2).cond_ii
        if prev is not None and not prev:
            assert not ok
        prev = ok


def test_degenerate_mz_clamped():
    rep = paper_report(mz=0.0)
    sigma = math.sqrt(1000 / 3.0)
    assert rep.fluct_gain == pytest.approx(sigma / 2.0)
    assert any("clamped" in n for n in rep.notes)


def test_small_angle_note():
    rep = paper_report(mz=-20.0)  # sigma ~ 18.3 not << 20
    assert any("small-angle" in n for n in rep.notes)
    rep2 = paper_report(mz=-500.0)
    assert not any("small-angle" in n for n in rep2.notes)


def test_checker_input_validation():
    with pytest.raises(ValueError):
        paper_report(omega=0.0)
    with pytest.raises(ValueError):
        paper_report(t2=0.0)
    with pytest.raises(ValueError):
        paper_report(sigma_my=-1.0)
    with pytest.raises(ValueError):
        check_conditions(0, 0.0, 1.0, -0.005, 7.0, 0.2, 0.33)


def test_sigma_helper():
    assert infinite_temperature_sigma_my(1000) == pytest.approx(math.sqrt(1000 / 3.0))


def test_telemetry_record_csv_format():
    rec = TelemetryRecord(t=0.1, mx=1.0, my=-2.5, mz=3.0, f=-0.0005, g=0.0, e=-12.125)
    row = rec.csv_row()
    assert row.split(",")[0] == "0.10000000000000001"  # 17 significant digits
    assert len(row.split(",")) == 7
