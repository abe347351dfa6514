"""Brightness/contrast augmentation: histogram stretching and equalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import GrayImage, clamp_u8


@dataclass(frozen=True)
class StretchParams:
    t_min: int = 0
    t_max: int = 255

    def __post_init__(self):
        if not 0 <= self.t_min < self.t_max <= 255:
            raise ValueError("need 0 <= t_min < t_max <= 255")


@dataclass(frozen=True)
class EqualizeParams:
    q0: int = 0
    qk: int = 255

    def __post_init__(self):
        if not 0 <= self.q0 < self.qk <= 255:
            raise ValueError("need 0 <= q0 < qk <= 255")


def histogram(img: GrayImage) -> np.ndarray:
    """Counts per brightness value, 256 bins."""
    return np.bincount(img.pixels.ravel(), minlength=256)


def stretch(img: GrayImage, p: StretchParams = StretchParams()) -> GrayImage:
    """Linearly remap the observed brightness range onto [t_min, t_max].

    A constant image maps to the midpoint of the target range.
    """
    p_min = int(img.pixels.min())
    p_max = int(img.pixels.max())
    if p_min == p_max:
        value = clamp_u8(np.array((p.t_min + p.t_max) / 2.0))
        return GrayImage(np.full(img.pixels.shape, value, dtype=np.uint8))
    levels = np.arange(256, dtype=np.float64)
    # multiply before dividing so exact halves (e.g. 127.5) survive rounding
    lut = clamp_u8((p.t_max - p.t_min) * (levels - p_min) / (p_max - p_min) + p.t_min)
    return GrayImage(lut[img.pixels])


def equalize(img: GrayImage, p: EqualizeParams = EqualizeParams()) -> GrayImage:
    """Cumulative-histogram remap of brightness into [q0, qk]."""
    hist = histogram(img)
    cum = np.cumsum(hist).astype(np.float64)
    n = img.pixels.size
    lut = clamp_u8(np.clip((p.qk - p.q0) / n * cum + p.q0, p.q0, p.qk))
    return GrayImage(lut[img.pixels])
