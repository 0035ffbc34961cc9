"""Exception hierarchy shared by all modules."""


class DeblurError(ValueError):
    """Base class for every error raised by this package."""


class ParameterError(DeblurError):
    pass


class DomainError(DeblurError):
    """A time lies outside the domain of a signal."""


class ResolutionError(DeblurError):
    """A grid size is not a power of two or does not divide another."""


class ShapeError(DeblurError):
    pass


class NumericError(DeblurError):
    """Non-finite values were passed to a numerical routine."""


class InputError(DeblurError):
    pass


class SpecError(DeblurError):
    """A synthetic-signal request cannot be satisfied."""


class WindowError(DeblurError):
    """Invalid display window for image export."""


class TirvError(DeblurError):
    """Base class for TIRV container parse errors."""


class BadMagicError(TirvError):
    pass


class UnsupportedVersionError(TirvError):
    pass


class TruncatedPayloadError(TirvError):
    pass


class LengthMismatchError(TirvError):
    pass
