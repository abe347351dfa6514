"""Grayscale raster type, file I/O and the pixel-level primitives.

Conventions fixed here and relied on everywhere else:
  * pixel (x, y) sits at coordinates (x, y); the geometric center of a
    w x h image is ((w-1)/2, (h-1)/2)
  * rotation angles are degrees, counterclockwise positive
  * rounding is nearest integer with ties away from zero, then clamp
    to [0, 255]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    IoFailure,
    NotGrayscale,
    RegionOutOfBounds,
    UnsupportedFormat,
)

_SUPPORTED_FORMATS = {"BMP", "PNG", "PPM", "TIFF"}  # PGM decodes as PPM


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values >= 0.0, np.floor(values + 0.5), np.ceil(values - 0.5))


def clamp_u8(values: np.ndarray) -> np.ndarray:
    """Round (ties away from zero) and clamp into the 8-bit range."""
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


class GrayImage:
    """Immutable 8-bit single-channel raster backed by a (h, w) array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels) -> None:
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("GrayImage requires a non-empty 2-D array")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        self.pixels = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "GrayImage":
        # internal: adopt a freshly-created uint8 array without copying
        out = object.__new__(cls)
        arr.setflags(write=False)
        out.pixels = arr
        return out

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class Region:
    """Integer rectangle in source-image coordinates."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError("Region needs w >= 1 and h >= 1")

    def valid_for(self, img: GrayImage) -> bool:
        return (
            self.x >= 0
            and self.y >= 0
            and self.x + self.w <= img.width
            and self.y + self.h <= img.height
        )

    @property
    def center(self) -> tuple[int, int]:
        """Integer-floored center pixel (x, y)."""
        return (self.x + self.w // 2, self.y + self.h // 2)


@dataclass(frozen=True)
class ImageStats:
    mean: float
    variance: float


def fit_region(r: Region, width: int, height: int) -> Region:
    """Translate ``r`` minimally so it fits inside a width x height image.

    Never shrinks; raises if the image is smaller than the region.
    """
    if r.w > width or r.h > height:
        raise RegionOutOfBounds(
            f"{r.w}x{r.h} region cannot fit in {width}x{height} image"
        )
    x = min(max(r.x, 0), width - r.w)
    y = min(max(r.y, 0), height - r.h)
    return Region(x, y, r.w, r.h)


def load_image(path) -> GrayImage:
    """Decode an 8-bit grayscale raster (BMP, PNG, PGM, TIFF).

    Multi-channel files are accepted only when every channel is identical.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in _SUPPORTED_FORMATS:
                raise UnsupportedFormat(f"{path}: format {fmt!r} not supported")
            mode = im.mode
            if mode == "L":
                arr = np.asarray(im, dtype=np.uint8)
            elif mode == "1":
                arr = np.asarray(im.convert("L"), dtype=np.uint8)
            elif mode in ("P", "RGB", "RGBA"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
                if np.any(rgb[..., 0] != rgb[..., 1]) or np.any(
                    rgb[..., 0] != rgb[..., 2]
                ):
                    raise NotGrayscale(f"{path}: color channels differ")
                arr = rgb[..., 0]
            else:
                raise UnsupportedFormat(f"{path}: mode {mode!r} is not 8-bit grayscale")
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: not a recognised raster file") from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return GrayImage(arr)


def save_image(img: GrayImage, path) -> None:
    """Write an 8-bit grayscale BMP; round-trips bit-exactly via load_image."""
    path = Path(path)
    try:
        Image.fromarray(img.pixels, mode="L").save(path, format="BMP")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def stats(img: GrayImage) -> ImageStats:
    """Arithmetic mean and population variance of all pixels."""
    data = img.pixels.astype(np.float64)
    return ImageStats(mean=float(data.mean()), variance=float(data.var()))


def crop(img: GrayImage, r: Region) -> GrayImage:
    if not r.valid_for(img):
        raise RegionOutOfBounds(
            f"region {r} exceeds {img.width}x{img.height} image bounds"
        )
    return GrayImage(img.pixels[r.y : r.y + r.h, r.x : r.x + r.w])


def crop_with_fill(img: GrayImage, r: Region, fill: int = 255) -> GrayImage:
    """Crop allowing the region to overflow the image; missing pixels take fill."""
    out = np.full((r.h, r.w), fill, dtype=np.uint8)
    sx0, sy0 = max(r.x, 0), max(r.y, 0)
    sx1, sy1 = min(r.x + r.w, img.width), min(r.y + r.h, img.height)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - r.y : sy1 - r.y, sx0 - r.x : sx1 - r.x] = img.pixels[
            sy0:sy1, sx0:sx1
        ]
    return GrayImage(out)


def rotate_about_center(
    img: GrayImage, angle: float, fill: int = 255, window: Region = None
) -> GrayImage:
    """Rotate counterclockwise about the geometric center, bilinear sampling.

    Output has the source dimensions; samples falling outside take ``fill``.
    Angle 0 (mod 360) is an exact identity. ``window`` restricts computation
    to that output sub-rectangle (identical pixels to rotating everything and
    cropping afterwards, just cheaper).
    """
    if angle % 360.0 == 0.0:
        out = GrayImage(img.pixels)
        return crop(out, window) if window is not None else out
    h, w = img.pixels.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = math.radians(angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    if window is None:
        window = Region(0, 0, w, h)
    dx = np.arange(window.x, window.x + window.w, dtype=np.float64) - cx
    dy = np.arange(window.y, window.y + window.h, dtype=np.float64) - cy
    # inverse map: source coords for each output pixel (y axis points down,
    # so this matrix realises a visually counterclockwise rotation)
    xs = (cos_t * dx)[None, :] - (sin_t * dy)[:, None] + cx
    ys = (sin_t * dx)[None, :] + (cos_t * dy)[:, None] + cy

    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx = xs - x0
    fy = ys - y0

    # pad with one ring of fill; clipping indices into the pad keeps every
    # out-of-source sample at the fill value without boolean masking
    padded = np.full((h + 2, w + 2), float(fill))
    padded[1:-1, 1:-1] = img.pixels
    np.clip(x0, -1, w, out=x0)
    np.clip(y0, -1, h, out=y0)
    x0 += 1
    y0 += 1
    x1 = np.minimum(x0 + 1, w + 1)
    y1 = np.minimum(y0 + 1, h + 1)

    top = padded[y0, x0]
    top += (padded[y0, x1] - top) * fx
    bot = padded[y1, x0]
    bot += (padded[y1, x1] - bot) * fx
    top += (bot - top) * fy
    # bilinear output is a convex combination of values in [0, 255], so the
    # shared rounding rule reduces to floor(x + 0.5) with no clamp
    np.floor(top + 0.5, out=top)
    return GrayImage._wrap(top.astype(np.uint8))
