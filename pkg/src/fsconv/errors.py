"""Exception types raised across the package."""


class FilterSummaryError(Exception):
    """Base class for all fsconv errors."""


class InvalidRatioError(FilterSummaryError, ValueError):
    """Compression ratio below 1, or a summary too short to hold one filter."""


class DegenerateStrideError(FilterSummaryError, ValueError):
    """Slice-aligned stride rounded down to 0: every filter would be identical."""


class ShapeMismatchError(FilterSummaryError, ValueError):
    """Array or layer shapes do not agree with the declared geometry."""


class OutOfRangeError(FilterSummaryError, IndexError):
    """Index or location outside its valid box."""


class UnsupportedGeometryError(FilterSummaryError, ValueError):
    """Geometry the fast convolution path cannot handle (second kernel size 1)."""


class EmptyInputError(FilterSummaryError, ValueError):
    """Quantization of an empty weight vector."""


class FSTooShortError(FilterSummaryError, ValueError):
    """Summary too short for a fractional filter location (needs length > K+1)."""


class FormatError(FilterSummaryError, ValueError):
    """Malformed model or architecture file."""


class NonDifferentiableWarning(UserWarning):
    """A fractional location landed exactly on an integer; the one-sided
    (right-hand) derivative is returned."""
