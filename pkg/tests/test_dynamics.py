"""Field evaluation, energy, and integrator properties."""

import math

import numpy as np
import pytest

from spincool.dynamics import (
    FieldEvaluator,
    IntegratorConfig,
    SpinState,
    energy,
    get_evaluator,
    local_fields,
    rk4_step,
    splitting_step,
    step,
)
from spincool.errors import ConfigError, SimulationAbort
from spincool.lattice import LatticeSpec, build_couplings


def random_state(n, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=(n, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    return SpinState(s)


def brute_force_fields(state, table, g, hz):
    """Oracle: per-pair accumulation through the pairwise lookup API."""
    n = state.n_spins
    h = np.zeros((n, 3))
    for m in range(n):
        ax = ay = az = 0.0
        for k in range(n):
            if k == m:
                continue
            jz, jp = table.pair(m, k)
            ax += jp * state.spins[k, 0]
            ay += jp * state.spins[k, 1]
            az += jz * state.spins[k, 2]
        h[m, 0] = -(ax + g)
        h[m, 1] = -ay
        h[m, 2] = -(az + hz)
    return h


def brute_force_energy(state, table, hz):
    n = state.n_spins
    e = 0.0
    for m in range(n):
        for k in range(m + 1, n):
            jz, jp = table.pair(m, k)
            e += jz * state.spins[m, 2] * state.spins[k, 2]
            e += jp * (
                state.spins[m, 0] * state.spins[k, 0] + state.spins[m, 1] * state.spins[k, 1]
            )
    return e + hz * float(np.sum(state.spins[:, 2]))


# ---------------------------------------------------------------------------
# fields and energy
# ---------------------------------------------------------------------------


def test_two_spin_pair_field():
    table = build_couplings(LatticeSpec(dims=(1, 1, 2)))
    st = SpinState(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]))
    h = local_fields(st, table, 0.0)
    # axial pair coupling jz = -2 -> field +2 along z on each site
    assert np.allclose(h, [[0, 0, 2], [0, 0, 2]], atol=1e-15)


def test_drive_only_field():
    spec = LatticeSpec(
        dims=(2, 2, 2), coupling_rule="custom_table", custom_table={}
    )  # all couplings zero
    table = build_couplings(spec)
    st = random_state(8, seed=1)
    h = local_fields(st, table, 0.7)
    assert np.allclose(h[:, 0], -0.7, atol=1e-15)
    assert np.allclose(h[:, 1:], 0.0, atol=1e-15)


@pytest.mark.parametrize("dims", [(4, 4, 4), (2, 3, 4)])
def test_fields_match_brute_force(dims):
    spec = LatticeSpec(dims=dims)
    table = build_couplings(spec)
    st = random_state(spec.n_sites, seed=2)
    ref = brute_force_fields(st, table, 0.31, -0.12)
    got = local_fields(st, table, 0.31, -0.12, method="direct")
    assert np.max(np.abs(got - ref)) < 1e-12
    got_fft = local_fields(st, table, 0.31, -0.12, method="fft")
    assert np.max(np.abs(got_fft - ref)) < 1e-12


def test_fft_equals_direct_6cube():
    spec = LatticeSpec(dims=(6, 6, 6))
    table = build_couplings(spec)
    for seed in range(5):
        st = random_state(216, seed=seed)
        a = local_fields(st, table, 0.2, 0.0, method="fft")
        b = local_fields(st, table, 0.2, 0.0, method="direct")
        assert np.max(np.abs(a - b)) < 1e-10


def test_field_size_mismatch():
    table = build_couplings(LatticeSpec(dims=(2, 2, 2)))
    st = random_state(5)
    with pytest.raises(ConfigError):
        local_fields(st, table, 0.0)


def test_two_spin_energy():
    table = build_couplings(LatticeSpec(dims=(1, 1, 2)))
    up = SpinState(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]))
    assert energy(up, table) == pytest.approx(-2.0, abs=1e-15)
    xx = SpinState(np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    assert energy(xx, table) == pytest.approx(1.0, abs=1e-15)


def test_energy_matches_brute_force():
    spec = LatticeSpec(dims=(3, 3, 3))
    table = build_couplings(spec)
    st = random_state(27, seed=3)
    ref = brute_force_energy(st, table, 0.2)
    assert energy(st, table, hz=0.2, method="direct") == pytest.approx(ref, rel=1e-12)
    assert energy(st, table, hz=0.2, method="fft") == pytest.approx(ref, rel=1e-12)


def test_fully_polarized_energy_zero():
    # trace-free coupling sum makes the aligned state an E = 0 state
    table = build_couplings(LatticeSpec(dims=(10, 10, 10)))
    st = SpinState(np.tile([0.0, 0.0, 1.0], (1000, 1)))
    assert abs(energy(st, table)) < 1e-9


def test_fft_requires_periodic():
    spec = LatticeSpec(dims=(2, 2, 2), periodic=False)
    table = build_couplings(spec)
    with pytest.raises(ConfigError):
        FieldEvaluator(table, "fft")
    # auto falls back to direct
    assert FieldEvaluator(table, "auto").method == "direct"


def test_auto_threshold():
    small = build_couplings(LatticeSpec(dims=(6, 6, 6)))
    large = build_couplings(LatticeSpec(dims=(8, 8, 8)))
    assert get_evaluator(small, "auto").method == "direct"
    assert get_evaluator(large, "auto").method == "fft"


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------


def constant_provider(h):
    hvec = np.asarray(h, dtype=float)

    def provider(t, spins):
        return np.tile(hvec, (spins.shape[0], 1))

    return provider


@pytest.mark.parametrize("stepper", [rk4_step, splitting_step])
def test_precession_sign_convention(stepper):
    # S = (1,0,0) precessing in h = (0,0,1) reaches (0,-1,0) after t = pi/2
    provider = constant_provider([0.0, 0.0, 1.0])
    n_steps = 500
    dt = (math.pi / 2) / n_steps
    s = np.array([[1.0, 0.0, 0.0]])
    for i in range(n_steps):
        s = stepper(s, i * dt, dt, provider)
    assert np.allclose(s[0], [0.0, -1.0, 0.0], atol=1e-8)


def make_h0_provider(table):
    ev = get_evaluator(table, "direct")

    def provider(t, spins):
        return ev.fields(spins, 0.0, 0.0)

    return provider


@pytest.mark.parametrize("scheme", ["rk4_renorm", "rotation_splitting"])
def test_norm_preservation(scheme):
    spec = LatticeSpec(dims=(3, 3, 3))
    table = build_couplings(spec)
    cfg = IntegratorConfig(scheme=scheme, dt=0.01)
    provider = make_h0_provider(table)
    st = random_state(27, seed=4)
    for _ in range(2000):
        st = step(st, cfg, provider)
    assert st.max_norm_error() < 1e-9


def test_mz_conservation_rk4():
    spec = LatticeSpec(dims=(4, 4, 4))
    table = build_couplings(spec)
    cfg = IntegratorConfig(scheme="rk4_renorm", dt=0.01)
    provider = make_h0_provider(table)
    st = random_state(64, seed=5)
    mz0 = float(np.sum(st.spins[:, 2]))
    for _ in range(1000):
        st = step(st, cfg, provider)
    assert abs(float(np.sum(st.spins[:, 2])) - mz0) <= 1e-8 * 64


def test_energy_drift_rk4_scales_like_dt4():
    spec = LatticeSpec(dims=(3, 3, 3))
    table = build_couplings(spec)
    provider = make_h0_provider(table)
    t_total = 10.0

    def drift(dt):
        st = random_state(27, seed=6)
        e0 = energy(st, table)
        for i in range(int(round(t_total / dt))):
            st = SpinState(rk4_step(st.spins, i * dt, dt, provider), (i + 1) * dt)
        return abs(energy(st, table) - e0) / abs(e0)

    d_coarse = drift(0.02)
    d_fine = drift(0.01)
    assert d_fine < 1e-6  # the conservation budget at the production step
    ratio = d_coarse / d_fine
    assert 6.0 < ratio < 50.0  # ~dt^4 (16) with room for noise


def test_splitting_time_reversal():
    spec = LatticeSpec(dims=(3, 3, 3))
    table = build_couplings(spec)
    provider = make_h0_provider(table)
    dt = 0.01
    n_steps = 1000  # t = 10 forward, then back
    st0 = random_state(27, seed=7)
    s = st0.spins.copy()
    for i in range(n_steps):
        s = splitting_step(s, i * dt, dt, provider)
    for i in range(n_steps):
        s = splitting_step(s, (n_steps - i) * dt, -dt, provider)
    assert np.max(np.abs(s - st0.spins)) < 1e-6


def test_splitting_energy_bounded_no_secular_drift():
    spec = LatticeSpec(dims=(3, 3, 3))
    table = build_couplings(spec)
    provider = make_h0_provider(table)
    dt = 0.01
    st = random_state(27, seed=8)
    energies = [energy(st, table)]
    for i in range(10000):  # t = 100
        st = SpinState(splitting_step(st.spins, i * dt, dt, provider), (i + 1) * dt)
        if (i + 1) % 100 == 0:
            energies.append(energy(st, table))
    e = np.asarray(energies)
    osc = np.max(np.abs(e - e[0]))
    first, second = e[: len(e) // 2], e[len(e) // 2 :]
    # secular drift would separate the window means beyond the oscillation band
    assert abs(np.mean(second) - np.mean(first)) < max(osc, 1e-12) * 1.0
    assert osc / abs(e[0]) < 1e-3  # bounded oscillation at dt = 0.01


def test_step_aborts_on_nonfinite():
    cfg = IntegratorConfig(scheme="rk4_renorm", dt=0.01)

    def bad_provider(t, spins):
        return np.full_like(spins, np.nan)

    st = random_state(4)
    with pytest.raises(SimulationAbort):
        step(st, cfg, bad_provider)


def test_rk4_stage_states_see_stage_mz():
    # the provider receives four distinct stage states per step
    table = build_couplings(LatticeSpec(dims=(2, 2, 2)))
    ev = get_evaluator(table, "direct")
    seen = []

    def provider(t, spins):
        seen.append(float(np.sum(spins[:, 2])))
        return ev.fields(spins, 0.5, 0.0)

    st = random_state(8, seed=9)
    rk4_step(st.spins, 0.0, 0.01, provider)
    assert len(seen) == 4


def test_integrator_config_validation():
    with pytest.raises(ConfigError):
        IntegratorConfig(scheme="euler")
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=-0.1)


def test_spin_state_validation():
    with pytest.raises(ConfigError):
        SpinState(np.zeros((4, 2)))
    st = SpinState(np.tile([0.6, 0.0, 0.0], (4, 1)))
    with pytest.raises(ConfigError):
        st.validate()
