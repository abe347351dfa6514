"""Small-area fingerprint dataset construction toolkit.

Turns a conventional full-area fingerprint database into a large set of
small (e.g. 128x128) training patches: fingerprint-area extraction,
rotation/shift augmentation, histogram stretching/equalization, uniform and
random-area noise, cross-correlation alignment of extra impressions, and a
deterministic dataset builder with a replayable manifest.
"""

from .area import NormalizationParams, PatchSpec, binarize, center_crop_region, \
    fingerprint_bounding_region, normalize
from .raster import GrayImage, ImageStats, Region, crop, load_image, \
    rotate_about_center, save_image, stats

__all__ = [
    "GrayImage",
    "ImageStats",
    "NormalizationParams",
    "PatchSpec",
    "Region",
    "binarize",
    "center_crop_region",
    "crop",
    "fingerprint_bounding_region",
    "load_image",
    "normalize",
    "rotate_about_center",
    "save_image",
    "stats",
]

__version__ = "0.1.0"
