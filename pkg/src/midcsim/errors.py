"""Exception hierarchy for the midcsim package."""


class MidcError(Exception):
    """Base class for all package-specific errors."""


class VoltageFloorError(MidcError):
    """Measured DC voltage too collapsed for a power-to-current conversion."""


class CosineDomainError(MidcError):
    """Converter equations produced an arccos argument outside [-1, 1]."""


class AlphaOutOfRangeError(MidcError):
    """Solved rectifier firing angle violates its configured limits."""


class StepTooLargeError(MidcError):
    """Integration step exceeds the stability margin of the tracking lag."""


class NegativeCoefficientError(MidcError):
    """Droop coefficient update with a negative gain."""


class ZeroStiffnessError(MidcError):
    """Subsystem has no frequency response (k_gov + damping = 0) for a nonzero deficit."""


class InsufficientHistoryError(MidcError):
    """Power time series shorter than the detection hold window."""


class InfeasibleError(MidcError):
    """Coefficient optimization has no feasible point under the given bounds."""


class BadIndexError(MidcError):
    """Scenario line index out of range."""


class NonFiniteError(MidcError):
    """Simulation state left the finite range."""


class DcSolveError(MidcError):
    """DC-link electrical solve failed during a simulation run."""

    def __init__(self, message, t=None, line=None):
        super().__init__(message)
        self.t = t
        self.line = line


class ScenarioParseError(MidcError):
    """Scenario file failed to parse; carries the offending field path."""

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
