"""Exception types shared across the toolkit."""


class FomtraceError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(FomtraceError):
    pass


class EmptyObjectSeeds(FomtraceError):
    """An object region eroded to nothing; no interior seeds survive."""


class EmptySeedSet(FomtraceError):
    pass


class SeedOutOfRange(FomtraceError):
    pass


class FrameTooSmall(FomtraceError):
    pass


class BadMagic(FomtraceError):
    pass


class TruncatedFile(FomtraceError):
    pass


class WindowTooShort(FomtraceError):
    pass


class CoverageGap(FomtraceError):
    """Decompositions or flow fields do not cover the requested window."""


class NoSeeds(FomtraceError):
    pass


class NoForegroundSeeds(FomtraceError):
    """The model offers no interior seeds; the object vanished or is occluded."""


class EmptyInitialMask(FomtraceError):
    pass


class TooFewFrames(FomtraceError):
    pass


class NothingToAccept(FomtraceError):
    pass


class LengthMismatch(FomtraceError):
    pass
