"""spincool: feedback-control cooling of finite classical spin lattices.

Simulates driven spin dynamics dS_m/dt = S_m x h_m on dipolar-coupled cubic
lattices under the amplitude-modulated feedback drive
g(t) = g0 cos(omega t) [f(t) - M_z], and provides the observables and
feasibility checks for the polarization-growth mechanism.
"""

from .dynamics import (
    FieldArray,
    IntegratorConfig,
    SpinState,
    energy,
    local_fields,
    step,
)
from .errors import ConfigError, SimulationAbort, TrackingLost
from .experiment import (
    InitSpec,
    RunConfig,
    RunResult,
    StopRules,
    resume,
    run,
    sample_infinite_temperature,
)
from .feedback import (
    Detector,
    DetectorModel,
    FeedbackConfig,
    Schedule,
    SteeringSpec,
    f_of_t,
    g_of_t,
    measured_mz,
)
from .lattice import CouplingTable, LatticeSpec, build_couplings, displacement_class
from .observables import (
    ConditionReport,
    TelemetryRecord,
    check_conditions,
    collective,
    estimate_t2,
    transverse_variance,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionReport",
    "ConfigError",
    "CouplingTable",
    "Detector",
    "DetectorModel",
    "FeedbackConfig",
    "FieldArray",
    "InitSpec",
    "IntegratorConfig",
    "LatticeSpec",
    "RunConfig",
    "RunResult",
    "Schedule",
    "SimulationAbort",
    "SpinState",
    "SteeringSpec",
    "StopRules",
    "TelemetryRecord",
    "TrackingLost",
    "build_couplings",
    "check_conditions",
    "collective",
    "displacement_class",
    "energy",
    "estimate_t2",
    "f_of_t",
    "g_of_t",
    "local_fields",
    "measured_mz",
    "resume",
    "run",
    "sample_infinite_temperature",
    "step",
    "transverse_variance",
]
