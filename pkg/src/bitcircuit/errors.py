"""Exception taxonomy shared by all bitcircuit modules."""


class BitcircuitError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(BitcircuitError, ValueError):
    """Inputs have inconsistent lengths, widths or dtypes."""


class CapacityError(BitcircuitError, OverflowError):
    """A requested structure exceeds what the index types can address."""


class DomainError(BitcircuitError, ValueError):
    """A value is outside the mathematical domain of an operation."""


class ValidationError(BitcircuitError, ValueError):
    """A model/dataset combination fails a runtime consistency check."""


class CacheInvariantError(BitcircuitError, RuntimeError):
    """A node cache disagrees with the circuit it claims to mirror."""


class FormatError(BitcircuitError, ValueError):
    """A binary stream does not conform to its file format.

    `offset` is the byte position at which the problem was detected, when
    known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ParseError(BitcircuitError, ValueError):
    """A text file does not parse; `line` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line
