"""Shared fixtures: synthetic fingerprint-like images and tiny databases."""

from functools import lru_cache

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from fpaug.raster import GrayImage, save_image

WORLD_SIZE = 400


@lru_cache(maxsize=32)
def _world_texture(finger_seed: int) -> np.ndarray:
    """Aperiodic ridge-like texture in [0, 1], unique per finger."""
    rng = np.random.default_rng(1000 + finger_seed)
    tex = gaussian_filter(rng.standard_normal((WORLD_SIZE, WORLD_SIZE)), 3.0)
    tex -= tex.min()
    tex /= tex.max()
    return tex


def make_impression(finger_seed: int, offset=(0, 0), size=192) -> GrayImage:
    """One capture of a synthetic finger: textured dark blob on white,
    with the ridge texture translated by ``offset`` between impressions."""
    tex = _world_texture(finger_seed)
    c = WORLD_SIZE // 2
    ox, oy = offset
    x0, y0 = c - size // 2 + ox, c - size // 2 + oy
    patch = tex[y0 : y0 + size, x0 : x0 + size]
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    r2 = (xx - size / 2) ** 2 + (yy - size / 2) ** 2
    envelope = np.exp(-r2 / (2 * (size * 0.28) ** 2))
    img = 255.0 - 235.0 * envelope * patch
    return GrayImage(np.clip(np.round(img), 0, 255).astype(np.uint8))


IMPRESSION_OFFSETS = [(0, 0), (5, 3), (-4, 2), (3, -5), (-2, 6), (6, -1)]


def make_db(directory, fingers=6, impressions=4, size=192, ext="bmp"):
    """Write a tiny aligned synthetic database named <finger>_<impression>."""
    for finger in range(1, fingers + 1):
        for imp in range(1, impressions + 1):
            img = make_impression(finger, IMPRESSION_OFFSETS[imp - 1], size)
            save_image(img, directory / f"{finger}_{imp}.{ext}")
    return directory


@pytest.fixture
def tiny_db(tmp_path):
    db_dir = tmp_path / "db"
    db_dir.mkdir()
    return make_db(db_dir, fingers=4, impressions=3)


def random_image(rng, w, h, low=0, high=256) -> GrayImage:
    return GrayImage(rng.integers(low, high, size=(h, w)).astype(np.uint8))
