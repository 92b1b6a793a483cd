"""Exception types shared across the package."""


class SpcError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(SpcError):
    """A matrix required to be positive-definite is not, even after jitter."""


class NoConvergence(SpcError):
    """An iterative matrix routine failed to converge."""


class DimensionMismatch(SpcError):
    """Operands have incompatible dimensions."""


class UnknownIdentifier(SpcError):
    """A structure identifier does not exist in the model."""


class LengthMismatch(SpcError):
    """Paired label sequences have different lengths."""


class ParseError(SpcError):
    """A data file could not be parsed; carries row/column location."""

    def __init__(self, message, row=None, column=None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column


class MissingColumn(SpcError):
    """A requested column is absent from the input file."""
