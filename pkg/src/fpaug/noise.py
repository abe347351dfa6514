"""Synthetic noise: per-pixel uniform noise and the sweat-blot style
random-area noise seeded in dense (dark) fingerprint tiles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import WindowTooLarge
from .raster import GrayImage, Region


@dataclass(frozen=True)
class UniformNoiseParams:
    a: int = -32
    b: int = 32

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError("need a <= b")
        if self.a < -255 or self.b > 255:
            raise ValueError("offsets must lie in [-255, 255]")


@dataclass(frozen=True)
class RandomAreaNoiseParams:
    window: int = 16
    dense_threshold: float = 64.0
    circle_diameter: int = 32
    circle_count: int = 4

    def __post_init__(self):
        if self.window < 4:
            raise ValueError("window must be >= 4")
        if self.circle_diameter < 2:
            raise ValueError("circle_diameter must be >= 2")
        if self.circle_count < 1:
            raise ValueError("circle_count must be >= 1")


@dataclass(frozen=True)
class NoiseOutcome:
    image: GrayImage
    applied: bool
    seed_window: Optional[Region] = None
    painted_pixels: int = 0


def add_uniform_noise(
    img: GrayImage, p: UniformNoiseParams, rng: np.random.Generator
) -> GrayImage:
    """Add an independent uniform integer offset from [a, b] to every pixel."""
    z = rng.integers(p.a, p.b + 1, size=img.pixels.shape, dtype=np.int64)
    return GrayImage(np.clip(img.pixels.astype(np.int64) + z, 0, 255).astype(np.uint8))


def dense_tiles(img: GrayImage, window: int, threshold: float) -> list[Region]:
    """Full (non-partial) window tiles whose mean brightness is strictly
    below the threshold, row-major."""
    if window > min(img.width, img.height):
        raise WindowTooLarge(
            f"window {window} exceeds {img.width}x{img.height} image"
        )
    out = []
    data = img.pixels.astype(np.float64)
    for ty in range(0, img.height - window + 1, window):
        for tx in range(0, img.width - window + 1, window):
            if data[ty : ty + window, tx : tx + window].mean() < threshold:
                out.append(Region(tx, ty, window, window))
    return out


def random_area_noise(
    img: GrayImage, p: RandomAreaNoiseParams, rng: np.random.Generator
) -> NoiseOutcome:
    """Black out a chain of overlapping disks seeded in a dense tile.

    A tile qualifies when its mean brightness is below the dense threshold;
    one is picked uniformly at random and the first disk sits at its center.
    Each following disk center moves by a uniform-random direction with
    magnitude in [diameter/4, diameter/2], which guarantees overlap with its
    predecessor. With no qualifying tile the image passes through unchanged.
    """
    try:
        candidates = dense_tiles(img, p.window, p.dense_threshold)
    except WindowTooLarge:
        candidates = []
    if not candidates:
        return NoiseOutcome(image=img, applied=False)

    tile = candidates[int(rng.integers(len(candidates)))]
    cx = float(tile.x + p.window // 2)
    cy = float(tile.y + p.window // 2)
    centers = [(cx, cy)]
    for _ in range(p.circle_count - 1):
        magnitude = rng.uniform(p.circle_diameter / 4.0, p.circle_diameter / 2.0)
        direction = rng.uniform(0.0, 2.0 * np.pi)
        cx = cx + magnitude * np.cos(direction)
        cy = cy + magnitude * np.sin(direction)
        centers.append((cx, cy))

    radius = p.circle_diameter / 2.0
    xs, ys = np.meshgrid(np.arange(img.width), np.arange(img.height))
    union = np.zeros(img.pixels.shape, dtype=bool)
    for ux, uy in centers:
        union |= (xs - ux) ** 2 + (ys - uy) ** 2 <= radius**2
    out = img.pixels.copy()
    out[union] = 0
    return NoiseOutcome(
        image=GrayImage(out),
        applied=True,
        seed_window=tile,
        painted_pixels=int(union.sum()),
    )
