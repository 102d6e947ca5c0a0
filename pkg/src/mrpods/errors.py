"""Exception types raised across the codec."""


class MrpodsError(Exception):
    """Base class for every error raised by this package."""


# compression
class EmptyBlock(MrpodsError, ValueError):
    pass


class IndexOutOfRange(MrpodsError, ValueError):
    pass


class TruncatedStream(MrpodsError, ValueError):
    pass


class InvalidTable(MrpodsError, ValueError):
    pass


class InputTooLarge(MrpodsError, ValueError):
    pass


class CorruptContainer(MrpodsError, ValueError):
    pass


# error correction
class RatioUnrealizable(MrpodsError, ValueError):
    pass


class LengthMismatch(MrpodsError, ValueError):
    pass


class UncorrectableCodeword(MrpodsError):
    pass


# sheet format
class ConfigInvalid(MrpodsError, ValueError):
    pass


class MixedPayloads(MrpodsError, ValueError):
    pass


class HeaderConflict(MrpodsError, ValueError):
    pass


class BadHeaderCrc(MrpodsError, ValueError):
    pass


class UnknownVersion(MrpodsError, ValueError):
    pass


# raster
class DpiTooLow(MrpodsError, ValueError):
    pass


class GridNotFound(MrpodsError):
    pass


class ExcessiveSkew(GridNotFound):
    pass


# cost model
class YearOutOfRange(MrpodsError, ValueError):
    pass
