"""Exception hierarchy shared across the package.

Everything raised on purpose derives from RunSimError so callers (CLI,
service) can map failures to exit codes / HTTP statuses in one place.
"""


class RunSimError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RunSimError):
    """A document could not be decoded (carries the offending line number)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(RunSimError):
    """Structurally decoded data violates an invariant (names the field)."""


class ConfigError(RunSimError):
    """A configuration document is inconsistent or incomplete."""


class NoDataError(RunSimError):
    """An operation found zero usable observations."""


class UnderdeterminedError(RunSimError):
    """A closed-form fit has more unknowns than independent observations."""


class NumericError(RunSimError):
    """Non-finite values where finite ones are required."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss; reports the last good step."""

    def __init__(self, message: str, last_good_step: int):
        super().__init__(message)
        self.last_good_step = last_good_step


class UnsupportedSettingError(RunSimError):
    """Inputs are valid but outside the method's defined regime."""


class DataError(RunSimError):
    """A referenced record (gradient, trajectory, run) is missing or bad."""


class ConditioningError(RunSimError):
    """A matrix fails the definiteness/symmetry the method requires."""


class EditError(RunSimError):
    """A curriculum edit is invalid for the curriculum it is applied to."""


class UndefinedStatisticError(RunSimError):
    """A statistic has no defined value on these inputs (e.g. zero variance)."""


class FittingError(RunSimError):
    """Model selection failed for every candidate (carries per-candidate causes)."""
