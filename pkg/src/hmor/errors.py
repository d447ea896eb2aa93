"""Exception types shared across the package."""


class HmorError(Exception):
    """Base class for package-specific failures."""


class GridDataError(HmorError, ValueError):
    """Raised when DC sweep samples cannot form a complete Cartesian grid.

    Carries the offending coordinates in args so callers can report which
    node is missing, duplicated, or off-axis.
    """


class OutOfDomainError(HmorError, ValueError):
    """Raised when a query point leaves the table's bounding box in error mode."""

    def __init__(self, axis, value, lo, hi):
        self.axis = axis
        self.value = value
        self.lo = lo
        self.hi = hi
        super().__init__(
            f"coordinate {value!r} on axis {axis} outside [{lo!r}, {hi!r}]"
        )


class NumericalOverflowError(HmorError, FloatingPointError):
    """Raised when a matrix exponential or integration step overflows."""


class SolverError(HmorError, RuntimeError):
    """Raised when an ODE solve or root bracket fails; message says where."""
