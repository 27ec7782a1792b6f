"""Exception types shared across the package."""


class OtasenseError(Exception):
    """Base class for all package errors."""


class ConfigError(OtasenseError):
    """Invalid scenario configuration. Carries every violated invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DimensionMismatchError(OtasenseError):
    """Array shapes inconsistent with the scenario configuration."""


class SingularBeamformerError(OtasenseError):
    """B B^H too ill-conditioned to invert (condition number above cap)."""


class SingularEqualizerError(OtasenseError):
    """H^H A A^H H too ill-conditioned for zero-forcing inversion."""


class RadarPowerError(OtasenseError):
    """Radar beamformer power alone exceeds the per-sensor budget."""


class NoFeasibleSampleError(OtasenseError):
    """Gaussian randomization produced no feasible candidate."""


class InfeasibleError(OtasenseError):
    """The conic program is (certified) infeasible."""


class SolverFailureError(OtasenseError):
    """The conic solver stopped without an optimal or infeasible certificate."""


class HarnessError(OtasenseError):
    """Experiment-runner misuse (empty record lists, bad sweep arguments)."""
