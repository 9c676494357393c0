"""Steering schedules, the drive law, and the detector model."""

import math

import numpy as np
import pytest

from spincool.errors import ConfigError
from spincool.feedback import (
    Detector,
    DetectorModel,
    FeedbackConfig,
    Schedule,
    SteeringSpec,
    f_of_t,
    g_of_t,
    measured_mz,
)


# ---------------------------------------------------------------------------
# steering
# ---------------------------------------------------------------------------


def test_linear_steering():
    s = SteeringSpec(kind="linear", fdot=-0.005)
    assert f_of_t(s, 1000.0) == pytest.approx(-5.0, rel=1e-15)
    assert f_of_t(s, 0.0) == 0.0
    assert f_of_t(SteeringSpec(kind="linear", fdot=2.5), 0.0) == 0.0


def test_stepwise_steering():
    s = SteeringSpec(kind="stepwise", df=-0.5, dt_step=1.0)
    assert f_of_t(s, 2.7) == pytest.approx(-1.0, rel=1e-15)
    assert f_of_t(s, 0.0) == 0.0
    assert f_of_t(s, 0.999) == 0.0
    assert f_of_t(s, 1.0) == -0.5


def test_table_steering_interpolates_and_clamps():
    s = SteeringSpec(kind="table", table=[(0.0, 0.0), (10.0, -5.0)])
    assert f_of_t(s, 5.0) == pytest.approx(-2.5)
    assert f_of_t(s, 20.0) == -5.0  # clamped to the last value
    assert f_of_t(s, 0.0) == 0.0


def test_steering_validation():
    with pytest.raises(ConfigError):
        SteeringSpec(kind="nope")
    with pytest.raises(ConfigError):
        SteeringSpec(kind="stepwise", dt_step=0.0)
    with pytest.raises(ConfigError):
        SteeringSpec(kind="table", table=[(1.0, 0.0), (1.0, 1.0)])  # non-increasing


def test_steering_pure_function():
    s = SteeringSpec(kind="table", table=[(0.0, 0.0), (3.0, 1.5), (7.0, -2.0)])
    vals = [f_of_t(s, 2.2) for _ in range(5)]
    assert len(set(vals)) == 1


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


def test_constant_schedule_integral_is_exact_product():
    om = Schedule.constant(7.0)
    for t in (0.0, 0.3, 123.456):
        assert om.integral(t) == 7.0 * t  # bitwise, used for the cos phase


def test_table_schedule_values_and_integral():
    sch = Schedule.from_table([(0.0, 1.0), (10.0, 3.0)])
    assert sch(5.0) == pytest.approx(2.0)
    assert sch(-1.0) == 1.0  # held before the first breakpoint
    assert sch(99.0) == 3.0  # held after the last
    assert sch.integral(10.0) == pytest.approx(20.0)  # trapezoid of the ramp
    assert sch.integral(20.0) == pytest.approx(20.0 + 3.0 * 10.0)
    # midpoint: integral over [0,5] of 1 + 0.2 tau = 5 + 0.1*25
    assert sch.integral(5.0) == pytest.approx(7.5)


def test_schedule_validation():
    with pytest.raises(ConfigError):
        Schedule.from_table([(0.0, 1.0), (0.0, 2.0)])
    with pytest.raises(ConfigError):
        Schedule.from_table([[1.0, 2.0, 3.0]])


# ---------------------------------------------------------------------------
# the drive law
# ---------------------------------------------------------------------------


def paper_config(**kw):
    return FeedbackConfig(
        g0=Schedule.constant(kw.get("g0", 0.2)),
        omega=Schedule.constant(kw.get("omega", 7.0)),
        steering=SteeringSpec(kind="linear", fdot=kw.get("fdot", -0.005)),
    )


def test_g_zero_when_target_matched():
    cfg = paper_config()
    assert g_of_t(cfg, 0.0, 0.0) == 0.0
    # f(t) == measured M_z at any t -> drive off
    t = 123.4
    f = f_of_t(cfg.steering, t)
    assert g_of_t(cfg, t, f) == 0.0


def test_g_direct_substitution():
    cfg = paper_config()
    assert g_of_t(cfg, 0.0, 31.6) == pytest.approx(-6.32, rel=1e-12)


def test_g_vanishes_at_quarter_period():
    cfg = paper_config()
    t = math.pi / 14.0  # cos(7t) = cos(pi/2) = 0
    assert abs(g_of_t(cfg, t, 123.0)) < 1e-12


def test_phase_integral_continuous_across_omega_ramp():
    cfg = FeedbackConfig(
        g0=Schedule.constant(0.2),
        omega=Schedule.from_table([(0.0, 7.0), (10.0, 5.0)]),
        steering=SteeringSpec(kind="linear", fdot=0.0),
    )
    # phase must be continuous: compare against numeric quadrature
    ts = np.linspace(0.0, 20.0, 4001)
    vals = np.array([cfg.omega(t) for t in ts])
    quad = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts))])
    for i in (100, 2000, 3500, 4000):
        assert cfg.phase(ts[i]) == pytest.approx(quad[i], abs=1e-6)


def test_omega_must_be_positive():
    with pytest.raises(ConfigError):
        FeedbackConfig(omega=Schedule.constant(0.0))
    with pytest.raises(ConfigError):
        FeedbackConfig(omega=Schedule.from_table([(0.0, 7.0), (5.0, -1.0)]))


# ---------------------------------------------------------------------------
# detector
# ---------------------------------------------------------------------------


def test_ideal_detector_passthrough():
    det = Detector(DetectorModel())
    for t in (0.0, 0.5, 1.7):
        assert measured_mz(det, 42.5, t) == 42.5


def test_hold_semantics():
    det = Detector(DetectorModel(noise_sigma=0.0, hold_interval=0.1))
    first = det.measure(10.0, 0.0)
    assert first == 10.0
    # within the same window the held value persists even if the input moves
    assert det.measure(11.0, 0.05) == 10.0
    assert det.measure(12.0, 0.0999) == 10.0
    # new window resamples
    assert det.measure(12.0, 0.1001) == 12.0


def test_noise_mean_zero():
    rng = np.random.default_rng(12345)
    det = Detector(DetectorModel(noise_sigma=1.0), rng)
    true = 5.0
    n = 100_000
    errs = np.array([det.measure(true, 0.0) - true for _ in range(n)])
    assert abs(np.mean(errs)) < 0.02
    assert np.std(errs) == pytest.approx(1.0, rel=0.02)


def test_noisy_detector_requires_rng():
    with pytest.raises(ConfigError):
        Detector(DetectorModel(noise_sigma=1.0), rng=None)


def test_detector_model_validation():
    with pytest.raises(ConfigError):
        DetectorModel(noise_sigma=-1.0)
    with pytest.raises(ConfigError):
        DetectorModel(hold_interval=-0.5)


def test_detector_state_roundtrip():
    rng = np.random.default_rng(7)
    det = Detector(DetectorModel(noise_sigma=0.3, hold_interval=0.2), rng)
    det.measure(1.0, 0.0)
    det.measure(2.0, 0.25)
    saved = det.state_dict()
    a = Detector(DetectorModel(noise_sigma=0.3, hold_interval=0.2), np.random.default_rng(0))
    a.load_state(saved)
    b_val = det.measure(3.0, 0.45)
    a_val = a.measure(3.0, 0.45)
    assert a_val == b_val
