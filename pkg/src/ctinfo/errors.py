"""Exception types raised across the library."""


class CTInfoError(Exception):
    """Base class for all library errors."""

    category = "Error"


class EmptyMaskError(CTInfoError):
    """No analyzable pixels remain under the active mask."""

    category = "EmptyMask"


class RangeError(CTInfoError):
    """Values fall outside the domain an operation requires."""

    category = "RangeError"


class ShapeError(CTInfoError):
    """Array shapes are incompatible."""

    category = "ShapeError"


class SpecMismatchError(CTInfoError):
    """Histograms built under different binning conventions were combined."""

    category = "SpecError"


class ParamError(CTInfoError):
    """A parameter is out of its permitted range."""

    category = "ParamError"


class DegenerateInputError(CTInfoError):
    """Input carries no usable variation (constant image, zero variance)."""

    category = "DegenerateInput"


class DomainError(CTInfoError):
    """Argument outside the mathematical domain of a function."""

    category = "DomainError"


class ConventionError(CTInfoError):
    """Quantities measured under different estimator conventions were mixed."""

    category = "ConventionError"


class IoError(CTInfoError):
    """A file could not be read or written."""

    category = "IoError"


class FormatError(CTInfoError):
    """File contents do not match the declared format."""

    category = "FormatError"
