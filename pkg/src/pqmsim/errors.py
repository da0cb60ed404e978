"""Exception hierarchy shared by the simulator, analysis and CLI layers."""


class PqmError(Exception):
    """Base class for all package errors."""


class ConfigError(PqmError, ValueError):
    """Invalid or inconsistent run configuration."""


class DomainError(PqmError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class EstimationError(PqmError):
    """Photon-count estimator could not be evaluated (zero total counts)."""

    def __init__(self, message, bin_index=None):
        super().__init__(message)
        self.bin_index = bin_index


class InsufficientDataError(PqmError):
    """Not enough samples to extract a steady-state cycle."""


class DegenerateCurveError(PqmError):
    """Curve has zero perimeter or too few points for the requested metric."""


class ParseError(PqmError, ValueError):
    """Malformed input file. Carries the offending line and column."""

    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.column = column


class TruncatedLogError(ParseError):
    """Detection log ends before the declared number of bins."""

    def __init__(self, message, last_complete_bin):
        super().__init__(f"{message}; last complete bin: {last_complete_bin}")
        self.last_complete_bin = last_complete_bin


class SingularSystemError(PqmError):
    """Reference points are collinear or coincident."""


class InconsistentRadiiError(PqmError):
    """Recovered point does not satisfy the verification circle."""
