"""Exception types shared across the package."""


class CopviError(Exception):
    """Base class for package errors."""


class NumericError(CopviError):
    """Raised when a numerical routine receives bad input or fails to converge."""


class DegenerateScaleError(NumericError):
    """Raised when an idiosyncratic scale entry collapses below the floor."""

    def __init__(self, row, value):
        self.row = int(row)
        self.value = float(value)
        super().__init__(f"idiosyncratic scale d[{self.row}] = {self.value:.3e} below floor 1e-8")


class IllConditionedError(NumericError):
    """Raised when a correlation factor is numerically singular."""


class UnsupportedFamilyError(CopviError):
    """Raised when an operation is not defined for the requested mixing family."""


class DivergenceError(NumericError):
    """Raised when the stochastic ascent loop diverges or hits non-finite values."""

    def __init__(self, step, detail):
        self.step = int(step)
        self.detail = detail
        super().__init__(f"divergence at step {self.step}: {detail}")


class DataError(CopviError):
    """Raised for malformed or insufficient input data."""
