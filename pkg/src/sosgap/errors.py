"""Exception types shared across the package."""

__all__ = [
    "SosGapError",
    "InvalidInstanceError",
    "InvalidAssignmentError",
    "ResourceLimitError",
    "DegreeError",
    "DegreeTooHighError",
    "GenerationError",
    "ConfigurationError",
    "InvalidMeasurementError",
]


class SosGapError(Exception):
    """Base class."""


class InvalidInstanceError(SosGapError, ValueError):
    pass


class InvalidAssignmentError(SosGapError, ValueError):
    pass


class ResourceLimitError(SosGapError):
    """A size cap (brute force, Hilbert dimension, ...) would be exceeded."""


class DegreeError(SosGapError, ValueError):
    """A polynomial or moment request exceeds the available degree."""


class DegreeTooHighError(DegreeError):
    """The width-d closure derives a contradiction.

    ``max_degree`` holds the largest contradiction-free degree found by
    bisection, or -1 if there is none.
    """

    def __init__(self, requested: int, max_degree: int):
        self.requested = requested
        self.max_degree = max_degree
        super().__init__(
            f"closure at width {requested} is contradictory; "
            f"largest consistent degree is {max_degree}"
        )


class GenerationError(SosGapError):
    pass


class ConfigurationError(SosGapError, ValueError):
    pass


class InvalidMeasurementError(SosGapError, ValueError):
    pass
