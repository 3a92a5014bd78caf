"""Exception hierarchy shared by every module."""


class VpcError(Exception):
    """Base class for all errors raised by vpcstereo."""


class ModelFileError(VpcError, ValueError):
    """A camera-parameter document is malformed or holds invalid values."""


class OutOfFovError(VpcError, ValueError):
    """A ray lies outside the model's field of view."""


class OutOfImageError(VpcError, ValueError):
    """A pixel lies outside the model's valid projection region."""


class NoConvergenceError(VpcError, ArithmeticError):
    """An iterative projection solver failed to converge."""


class DimensionMismatchError(VpcError, ValueError):
    pass


class FovExceededError(VpcError, ValueError):
    """A requested virtual view does not fit inside the fisheye field of view."""


class LutFormatError(VpcError, ValueError):
    pass


class EmptyMaskError(VpcError, ValueError):
    pass


class EmptyAfterFilterError(VpcError, ValueError):
    pass


class UnderdeterminedError(VpcError, ValueError):
    pass


class BadParamsError(VpcError, ValueError):
    pass
