"""Fingerprint area extraction: normalization, binarization and the
centered crop region that becomes the network input patch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoFingerprintArea, PatchLargerThanArea
from .raster import GrayImage, Region, clamp_u8

DEFAULT_TARGET_MEAN = 100.0
DEFAULT_TARGET_VARIANCE = 100.0
DEFAULT_BIN_THRESHOLD = 100
DEFAULT_BLOCK = 16
DEFAULT_MIN_DENSITY = 0.10


@dataclass(frozen=True)
class NormalizationParams:
    target_mean: float = DEFAULT_TARGET_MEAN
    target_variance: float = DEFAULT_TARGET_VARIANCE

    def __post_init__(self):
        if not 0.0 <= self.target_mean <= 255.0:
            raise ValueError("target_mean must lie in [0, 255]")
        if self.target_variance <= 0.0:
            raise ValueError("target_variance must be positive")


@dataclass(frozen=True)
class PatchSpec:
    """Output patch dimensions fed to the network (default 128x128)."""

    width: int = 128
    height: int = 128

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("patches below 16px carry no ridge structure")


class BinaryImage:
    """Boolean mask; True marks foreground (dark ridge) pixels."""

    __slots__ = ("mask",)

    def __init__(self, mask) -> None:
        arr = np.asarray(mask, dtype=bool)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("BinaryImage requires a non-empty 2-D mask")
        arr = arr.copy()
        arr.setflags(write=False)
        self.mask = arr

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


def normalize(img: GrayImage, p: NormalizationParams = NormalizationParams()) -> GrayImage:
    """Force the image toward the target mean/variance.

    Pixels above the source mean move to target_mean + sqrt(Vt*(I-M)^2/V),
    pixels at or below it mirror downward; for a constant input the output
    is the constant target mean.
    """
    data = img.pixels.astype(np.float64)
    mean = data.mean()
    var = data.var()
    if var == 0.0:
        return GrayImage(np.full(data.shape, clamp_u8(p.target_mean), dtype=np.uint8))
    scale = np.sqrt(p.target_variance / var)
    return GrayImage(clamp_u8(p.target_mean + scale * (data - mean)))


def binarize(img: GrayImage, threshold: int = DEFAULT_BIN_THRESHOLD) -> BinaryImage:
    """Dark pixels (strictly below threshold) become foreground."""
    return BinaryImage(img.pixels < threshold)


def fingerprint_bounding_region(
    bin_img: BinaryImage,
    block: int = DEFAULT_BLOCK,
    min_density: float = DEFAULT_MIN_DENSITY,
) -> Region:
    """Tight bounding box of all block tiles dense enough in foreground.

    Tiles are block x block, partial at the right/bottom edges; a tile
    qualifies when its foreground fraction is >= min_density.
    """
    h, w = bin_img.mask.shape
    x_min = y_min = None
    x_max = y_max = None
    for ty in range(0, h, block):
        for tx in range(0, w, block):
            tile = bin_img.mask[ty : ty + block, tx : tx + block]
            if tile.mean() >= min_density:
                x1, y1 = tx + tile.shape[1], ty + tile.shape[0]
                x_min = tx if x_min is None else min(x_min, tx)
                y_min = ty if y_min is None else min(y_min, ty)
                x_max = x1 if x_max is None else max(x_max, x1)
                y_max = y1 if y_max is None else max(y_max, y1)
    if x_min is None:
        raise NoFingerprintArea("no tile met the density requirement")
    return Region(x_min, y_min, x_max - x_min, y_max - y_min)


def center_crop_region(fp: Region, spec: PatchSpec) -> Region:
    """Patch-sized region centered (integer-floored) on the fingerprint area."""
    if spec.width > fp.w or spec.height > fp.h:
        raise PatchLargerThanArea(
            f"{spec.width}x{spec.height} patch exceeds {fp.w}x{fp.h} fingerprint area"
        )
    cx, cy = fp.center
    return Region(cx - spec.width // 2, cy - spec.height // 2, spec.width, spec.height)
