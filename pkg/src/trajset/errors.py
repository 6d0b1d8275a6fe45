"""Exception types raised across the pipeline."""


class TrajsetError(Exception):
    """Base class for every error raised by this package."""


class UnreadableSource(TrajsetError, OSError):
    pass


class UnsupportedFormat(TrajsetError, ValueError):
    pass


class InconsistentDimensions(TrajsetError, ValueError):
    pass


class FrameTooSmall(TrajsetError, ValueError):
    pass


class DimensionMismatch(TrajsetError, ValueError):
    pass


DimMismatch = DimensionMismatch


class BadKernel(TrajsetError, ValueError):
    pass


class OutOfFrame(TrajsetError, ValueError):
    pass


class EmptyInput(TrajsetError, ValueError):
    pass


class DegenerateData(TrajsetError, ValueError):
    pass


class TooFewSamples(TrajsetError, ValueError):
    pass


class NoFeatures(TrajsetError, ValueError):
    pass


class ZeroVector(TrajsetError, ValueError):
    pass


class SingleClass(TrajsetError, ValueError):
    pass


class SingleGroup(TrajsetError, ValueError):
    pass


class EmptyBlock(TrajsetError, ValueError):
    pass


class BadFile(TrajsetError, ValueError):
    """A binary artifact (TRJ1/TSF1/GMM1/MLP1) has a wrong magic or is truncated."""


class InvalidConfig(TrajsetError, ValueError):
    pass
