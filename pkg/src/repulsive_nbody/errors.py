"""Exception hierarchy shared by all modules."""


class NBodyError(Exception):
    """Base class for every error raised by this package."""


class DegenerateConfigurationError(NBodyError, ValueError):
    """Two particles occupy the same point."""


class UndefinedAtTimeError(NBodyError, ValueError):
    """A time-dependent functional was requested where it is not defined."""


class NotApplicableError(NBodyError, ValueError):
    """The quantity needs more particles (or samples) than are available."""


class NotInDiagnosticWindowError(NBodyError, ValueError):
    """Diagnostics only exist for t >= 1."""


class StepUnderflowError(NBodyError, RuntimeError):
    """Adaptive step size fell below the configured minimum."""


class NumericalBlowupError(NBodyError, FloatingPointError):
    """The integrator produced a non-finite state."""


class InsufficientHorizonError(NBodyError, ValueError):
    """Trajectory does not reach far enough in time for an asymptotic fit."""


class FitError(NBodyError, ValueError):
    """Least-squares design is rank deficient."""


class DomainError(NBodyError, ValueError):
    """Input data lies outside a fit model's domain."""


class InfeasibleSpecError(NBodyError, ValueError):
    """Rejection sampling could not satisfy the scenario constraints."""


class ConfigError(NBodyError, ValueError):
    """Run configuration failed validation."""


class CSVParseError(NBodyError, ValueError):
    """A trajectory CSV does not conform to the expected schema."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column
