"""Locate the reference patch inside extra impressions of the same finger.

Similarity is normalized cross-correlation (Pearson correlation of pixel
vectors) over normalized images, searched coarse-to-fine over position with
a small rotation set, and accepted only above a score threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .area import (
    NormalizationParams,
    PatchSpec,
    binarize,
    fingerprint_bounding_region,
    normalize,
)
from .errors import ImageTooSmall, ZeroVariance
from .geometry import RotationAugment, rotated_patch
from .raster import GrayImage, Region

DEFAULT_ACCEPT_THRESHOLD = 0.35


@dataclass(frozen=True)
class ReferenceTemplate:
    patch: GrayImage  # normalized reference area
    finger_id: int


@dataclass(frozen=True)
class AlignmentResult:
    region: Region
    angle: float
    score: float


@dataclass(frozen=True)
class Rejected:
    """Best candidate found, but below the acceptance threshold."""

    best: AlignmentResult


@dataclass(frozen=True)
class AlignSearchParams:
    coarse_stride: int = 8
    refine_radius: int = 8
    angle_set: tuple = tuple(range(-10, 11, 2))
    accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD

    def __post_init__(self):
        if self.coarse_stride < 1:
            raise ValueError("coarse_stride must be >= 1")
        if not -1.0 < self.accept_threshold < 1.0:
            raise ValueError("accept_threshold must lie in (-1, 1)")


def ncc(a: GrayImage, b: GrayImage) -> float:
    """Pearson correlation of two equal-sized patches, in [-1, 1]."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError("ncc requires equal dimensions")
    va = a.pixels.astype(np.float64).ravel()
    vb = b.pixels.astype(np.float64).ravel()
    va = va - va.mean()
    vb = vb - vb.mean()
    na = np.sqrt(va @ va)
    nb = np.sqrt(vb @ vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVariance("constant input has no correlation")
    return float(np.clip((va @ vb) / (na * nb), -1.0, 1.0))


def accept(result: AlignmentResult, threshold: float) -> bool:
    """Strictly-greater acceptance rule."""
    return result.score > threshold


def _positions(lo: int, hi: int, stride: int) -> list[int]:
    """lo..hi inclusive at the given stride, always including hi."""
    if hi <= lo:
        return [max(lo, 0)]
    xs = list(range(lo, hi + 1, stride))
    if xs[-1] != hi:
        xs.append(hi)
    return xs


def _score_candidate(
    norm: GrayImage,
    ref: GrayImage,
    spec: PatchSpec,
    x: int,
    y: int,
    angle: float,
) -> float:
    center = (x + spec.width // 2, y + spec.height // 2)
    patch = rotated_patch(norm, center, spec, RotationAugment(angle % 360.0))
    try:
        return ncc(patch, ref)
    except ZeroVariance:
        return -1.0


def best_matching_region(
    extra: GrayImage,
    ref: ReferenceTemplate,
    spec: PatchSpec,
    sp: AlignSearchParams = AlignSearchParams(),
) -> AlignmentResult | Rejected:
    """Coarse-to-fine search for the window best correlated with the template.

    The extra image is normalized, its fingerprint bounding region computed,
    and a patch-sized window slid over that region at the coarse stride for
    every angle in the search set; the winner is refined at stride 1. Ties
    break toward the lowest (y, x, angle) so parallel and serial runs agree.
    """
    if extra.width < spec.width or extra.height < spec.height:
        raise ImageTooSmall(
            f"{extra.width}x{extra.height} image cannot hold a "
            f"{spec.width}x{spec.height} patch"
        )
    norm = normalize(extra, NormalizationParams())
    fp = fingerprint_bounding_region(binarize(norm))

    x_hi = min(fp.x + fp.w - spec.width, extra.width - spec.width)
    y_hi = min(fp.y + fp.h - spec.height, extra.height - spec.height)
    x_lo = min(max(fp.x, 0), extra.width - spec.width)
    y_lo = min(max(fp.y, 0), extra.height - spec.height)
    xs = _positions(x_lo, max(x_hi, x_lo), sp.coarse_stride)
    ys = _positions(y_lo, max(y_hi, y_lo), sp.coarse_stride)

    x_max = extra.width - spec.width
    y_max = extra.height - spec.height

    def sweep(best, x_list, y_list, angle_indices):
        for ai in angle_indices:
            angle = sp.angle_set[ai]
            for y in y_list:
                for x in x_list:
                    score = _score_candidate(norm, ref.patch, spec, x, y, angle)
                    key = (-score, y, x, ai)
                    if best is None or key < best:
                        best = key
        return best

    def neighborhood(center_pos, radius, stride, hi):
        lo_v = max(center_pos - radius, 0)
        hi_v = min(center_pos + radius, hi)
        vals = list(range(lo_v, hi_v + 1, stride))
        if vals[-1] != hi_v:
            vals.append(hi_v)
        return vals

    all_angles = range(len(sp.angle_set))
    best = sweep(None, xs, ys, all_angles)

    # refine positions around the coarse winner, keeping every angle in
    # play (the coarse lattice can favour the wrong angle off-grid):
    # stride 2 over the refine radius, then stride 1 in a tight ring
    _, by, bx, _ = best
    best = sweep(
        best,
        neighborhood(bx, sp.refine_radius, 2, x_max),
        neighborhood(by, sp.refine_radius, 2, y_max),
        all_angles,
    )
    _, by, bx, _ = best
    best = sweep(
        best,
        neighborhood(bx, 2, 1, x_max),
        neighborhood(by, 2, 1, y_max),
        all_angles,
    )

    neg_score, by, bx, bai = best
    result = AlignmentResult(
        region=Region(bx, by, spec.width, spec.height),
        angle=float(sp.angle_set[bai]),
        score=-neg_score,
    )
    if accept(result, sp.accept_threshold):
        return result
    return Rejected(best=result)
