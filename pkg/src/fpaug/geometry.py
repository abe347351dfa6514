"""Rotation and shift augmentation of the reference patch."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .area import PatchSpec
from .errors import CenterOutOfBounds
from .raster import (
    GrayImage,
    Region,
    crop,
    crop_with_fill,
    fit_region,
    rotate_about_center,
)

ROTATION_FILL = 255  # fingerprint background is white


@dataclass(frozen=True)
class RotationAugment:
    angle: float  # degrees, counterclockwise

    def __post_init__(self):
        if not 0.0 <= self.angle < 360.0:
            raise ValueError("angle must lie in [0, 360)")


@dataclass(frozen=True)
class ShiftAugment:
    dx: int
    dy: int


def shift_bound(side: int) -> int:
    """Largest legal |shift| along an axis: 10% of the side, truncated."""
    return int(0.1 * side)


def enlarged_side(spec: PatchSpec) -> int:
    """Side of the square that covers the patch under any rotation."""
    return math.ceil(2.0 * math.hypot(spec.width / 2.0, spec.height / 2.0))


def patch_region(center: tuple[int, int], spec: PatchSpec) -> Region:
    """Patch-sized region whose integer-floored center is ``center``."""
    cx, cy = center
    return Region(cx - spec.width // 2, cy - spec.height // 2, spec.width, spec.height)


def rotated_patch(
    img: GrayImage,
    center: tuple[int, int],
    spec: PatchSpec,
    rot: RotationAugment,
) -> GrayImage:
    """Extract the rotation-covering square around ``center``, rotate it,
    and cut the final patch from its middle.

    The square is white-padded where it overflows the source, so patches can
    be taken near image edges. Angle 0 reproduces the plain center crop
    bit-exactly.
    """
    cx, cy = center
    if not (0 <= cx < img.width and 0 <= cy < img.height):
        raise CenterOutOfBounds(f"center {center} outside {img.width}x{img.height}")
    # extra 2px ring beyond the covering side: integer flooring can push a
    # patch corner up to half a pixel past the exact radius, and bilinear
    # sampling needs one more pixel of support
    side = enlarged_side(spec) + 4
    square = crop_with_fill(
        img, Region(cx - side // 2, cy - side // 2, side, side), fill=ROTATION_FILL
    )
    inner = Region(
        side // 2 - spec.width // 2,
        side // 2 - spec.height // 2,
        spec.width,
        spec.height,
    )
    return rotate_about_center(square, rot.angle, fill=ROTATION_FILL, window=inner)


def shifted_patch(
    img: GrayImage,
    center: tuple[int, int],
    spec: PatchSpec,
    sh: ShiftAugment,
) -> GrayImage:
    """Patch centered at the shifted point, nudged minimally into bounds."""
    cx, cy = center
    target = patch_region((cx + sh.dx, cy + sh.dy), spec)
    return crop(img, fit_region(target, img.width, img.height))


def sample_rotation(rng: np.random.Generator) -> RotationAugment:
    """Uniform angle on [0, 360) at one-degree granularity."""
    return RotationAugment(float(rng.integers(0, 360)))


def sample_shift(spec: PatchSpec, rng: np.random.Generator) -> ShiftAugment:
    """Uniform integer shift keeping >= 80% overlap with the original patch."""
    bx = shift_bound(spec.width)
    by = shift_bound(spec.height)
    return ShiftAugment(
        dx=int(rng.integers(-bx, bx + 1)),
        dy=int(rng.integers(-by, by + 1)),
    )


def overlap_fraction(spec: PatchSpec, sh: ShiftAugment) -> float:
    """Axis-aligned overlap between the original and shifted patch."""
    return ((spec.width - abs(sh.dx)) * (spec.height - abs(sh.dy))) / (
        spec.width * spec.height
    )
