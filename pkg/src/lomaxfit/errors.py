"""Exception hierarchy shared across the package."""


class LomaxError(Exception):
    """Base class for all package errors."""


class DomainError(LomaxError, ValueError):
    """An argument lies outside the domain of a function."""


class MomentError(LomaxError, ValueError):
    """A requested raw moment is infinite for the given shape."""


class DegenerateSampleError(LomaxError, ValueError):
    """The sample has no spread (or too few points) for the requested operation."""


class OptimizerError(LomaxError, RuntimeError):
    """An optimizer could not proceed.

    ``point`` carries the abscissa at which the failure was detected, when known.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ObjectiveError(OptimizerError):
    """An objective function evaluated to a non-finite value."""


class DataError(LomaxError, ValueError):
    """Input data could not be parsed or validated."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class BootstrapError(LomaxError, RuntimeError):
    """A bootstrap procedure could not produce a usable result."""
