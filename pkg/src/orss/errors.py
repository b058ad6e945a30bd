"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """A row or matrix does not have the dimension the consumer expects."""


class StreamFormatError(ValueError):
    """A row-stream file could not be parsed."""


class InvariantViolation(RuntimeError):
    """An internal invariant that the algorithms guarantee was broken.

    This signals a bug (or catastrophic roundoff), never bad user input.
    """
