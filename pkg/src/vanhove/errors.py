"""Exception hierarchy shared by all modules."""


class VanHoveError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(VanHoveError, ValueError):
    pass


class NumericFailure(VanHoveError):
    """A numerical routine could not deliver its result to tolerance."""


class DivergentIntegral(NumericFailure):
    pass


class IrDivergent(DivergentIntegral):
    pass


class UvDivergent(DivergentIntegral):
    pass


class NonPsdCovariance(NumericFailure):
    pass


class Unsupported(VanHoveError):
    pass


class UndefinedHatAtZero(VanHoveError):
    pass
