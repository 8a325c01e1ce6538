"""Exception types raised across the package."""


class IsoDepthError(Exception):
    """Base class for all package errors."""


class EmptyInput(IsoDepthError, ValueError):
    pass


class NonFiniteValue(IsoDepthError, ValueError):
    pass


class DuplicateValue(IsoDepthError, ValueError):
    """A coordinate occurs more than once in a 1-D sample."""

    def __init__(self, value, message=None):
        self.value = value
        super().__init__(message or f"duplicate value {value!r}")


class NotEnoughPoints(IsoDepthError, ValueError):
    pass


class RangeOutOfBounds(IsoDepthError, IndexError):
    pass


class IndexOutOfBounds(IsoDepthError, IndexError):
    pass


class ParseError(IsoDepthError, ValueError):
    """A CSV cell could not be read as a real number.

    ``row`` is the 1-based data row (the header is not counted).
    """

    def __init__(self, row, column, text=None):
        self.row = row
        self.column = column
        msg = f"cannot parse row {row}, column {column!r}"
        if text is not None:
            msg += f": {text!r}"
        super().__init__(msg)


class NoNumericColumns(IsoDepthError, ValueError):
    pass


class DimensionMismatch(IsoDepthError, ValueError):
    pass


class KTooLarge(IsoDepthError, ValueError):
    pass


class InvalidParams(IsoDepthError, ValueError):
    pass


class OddN0(InvalidParams):
    pass


class EvenN1(InvalidParams):
    pass
