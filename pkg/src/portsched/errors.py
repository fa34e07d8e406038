"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ParameterError -> 1, DataFormatError -> 2,
InfeasibilityError -> 3.
"""


class PortschedError(Exception):
    """Base class for all package errors."""


class ParameterError(PortschedError):
    """Invalid argument or configuration value (usage error)."""


class DataFormatError(PortschedError):
    """Malformed or unreadable input data."""


class InfeasibilityError(PortschedError):
    """A schedule violated invariants where feasibility was required."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else []
