"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, SimulationAbort -> 3,
TrackingLost -> 4 (only when halting on tracking loss is enabled).
"""


class ConfigError(ValueError):
    """Invalid specification, configuration, or incompatible inputs."""


class SimulationAbort(RuntimeError):
    """Integration produced a non-finite state.

    Carries the path of the last-good-state checkpoint when one was written.
    """

    def __init__(self, message: str, checkpoint_path=None, t=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
        self.t = t


class TrackingLost(RuntimeError):
    """Feedback loop lost the steering target and halting was requested."""

    def __init__(self, message: str, t=None):
        super().__init__(message)
        self.t = t
