"""Exception types shared across the package."""


class NetsurvError(Exception):
    """Base class for all package-specific failures."""


class DomainError(NetsurvError, ValueError):
    """Invalid parameter or argument value."""


class ParseError(NetsurvError):
    """Malformed input file.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CoverageError(NetsurvError):
    """Life table does not cover a (year, age, sex) a subject needs."""

    def __init__(self, year, age, sex):
        super().__init__(
            f"life table for sex {sex!r} has no entry for year {year}, age {age}"
        )
        self.year = year
        self.age = age
        self.sex = sex


class DegeneracyError(NetsurvError):
    """All-cause survival collapsed to zero or below for a subject."""


class ModelInconsistencyError(NetsurvError):
    """Likelihood contributions had to be floored for too many subjects."""


class FitError(NetsurvError):
    """Optimization failed; carries per-start traces when available."""

    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = traces or []


class CalibrationError(NetsurvError):
    """Censoring calibration could not reach the requested fraction."""


class StudyError(NetsurvError):
    """Simulation study exceeded the tolerated replication failure rate."""
