"""Exception types shared across the package."""


class NsdiError(Exception):
    """Base class for simulation errors."""


class PropagationDivergedError(NsdiError):
    """Non-finite amplitudes appeared during a propagation step (dt too large)."""


class ConvergenceError(NsdiError):
    """Imaginary-time relaxation hit the iteration cap before reaching tolerance."""

    def __init__(self, message, last_delta=None):
        super().__init__(message)
        self.last_delta = last_delta


class InvalidStateError(NsdiError):
    """Wavefunction does not satisfy a required precondition (e.g. unit norm)."""


class OutOfDomainError(NsdiError):
    """A requested point lies outside the simulation grid."""


class DegenerateTraceError(NsdiError):
    """A trajectory trace is identically zero and has no meaningful envelope."""


class TraceRejectedError(NsdiError):
    """Too many samples of a trace fell below the envelope floor."""

    def __init__(self, message, invalid_fraction=None):
        super().__init__(message)
        self.invalid_fraction = invalid_fraction


class InsufficientStatisticsError(NsdiError):
    """Not enough phase samples to build a histogram."""

    def __init__(self, message, count=0):
        super().__init__(message)
        self.count = count


class UndefinedFwhmError(NsdiError):
    """The phase density has no usable peak (near-uniform plateau)."""


class InsufficientSelectionError(NsdiError):
    """A channel selector matched too few ensemble configurations."""

    def __init__(self, message, count=0):
        super().__init__(message)
        self.count = count


class ConfigError(NsdiError):
    """Run configuration failed validation."""


class StageError(NsdiError):
    """A pipeline stage failed; carries the stage tag for diagnostics."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
