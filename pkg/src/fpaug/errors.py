"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all library errors."""


class IoFailure(PipelineError):
    """File could not be read or written."""


class UnsupportedFormat(IoFailure):
    """Raster format not among the supported set."""


class NotGrayscale(PipelineError):
    """Multi-channel input whose channels disagree."""


class RegionOutOfBounds(PipelineError):
    """Region does not fit inside the image."""


class NoFingerprintArea(PipelineError):
    """No tile in the binarized image met the density requirement."""


class PatchLargerThanArea(PipelineError):
    """Requested patch exceeds the detected fingerprint area."""


class CenterOutOfBounds(PipelineError):
    """Patch center lies outside the source image."""


class WindowTooLarge(PipelineError):
    """Tile window exceeds the image dimensions."""


class ZeroVariance(PipelineError):
    """Constant image where a nonzero variance is required."""


class ImageTooSmall(PipelineError):
    """Image is smaller than the requested patch."""


class EmptyDatabase(PipelineError):
    """No usable source images were found."""


class MalformedPlan(PipelineError):
    """Augmentation plan violates its own ratio constraints."""


class UnknownPreset(PipelineError):
    """Preset name not recognized."""


class VerifyCountTooLarge(PipelineError):
    """Verification split cannot be satisfied."""
