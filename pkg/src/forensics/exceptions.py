class ForensicsError(Exception):
    """Base class for errors raised by the analysis pipeline."""


class DataError(ForensicsError):
    """Input data cannot be used (malformed rows, failed joins, empty subsets)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RankDeficientError(ForensicsError):
    """The design matrix does not have full column rank."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class WeakInstrumentError(ForensicsError):
    """Z'X is numerically singular, so the IV estimator is not identified."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SimulationError(ForensicsError):
    """Simulation parameters cannot produce a usable synthetic election."""
