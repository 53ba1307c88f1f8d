"""Exception types raised by this package, with their process exit codes."""


class TomoError(Exception):
    """Base class for every error this package raises deliberately."""

    exit_code = 1


class ValidationError(TomoError):
    """An argument or parameter value is invalid."""

    exit_code = 1


class DimensionError(ValidationError):
    """Tensor extents do not line up for the requested operation."""


class CapacityError(TomoError):
    """A requested size exceeds a dense-storage guard."""

    exit_code = 2


class DataFormatError(TomoError):
    """A persisted file does not conform to its documented format."""

    exit_code = 3


class DegeneracyError(TomoError):
    """The ground level of the synthesis Hamiltonian is (near-)degenerate."""

    exit_code = 1


class DegenerateFitError(TomoError):
    """A fitted distribution carries no usable total mass."""

    exit_code = 4


class IntegrityError(TomoError):
    """Inputs that must be mutually consistent are not."""

    exit_code = 1
