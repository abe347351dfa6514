"""End-to-end dataset construction: scan a source database, extract a
reference patch per finger, align extra impressions, run the augmentation
plan, and emit named BMP patches plus a replayable manifest."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry, noise, photometric
from .align import (
    AlignSearchParams,
    ReferenceTemplate,
    Rejected,
    best_matching_region,
)
from .area import (
    NormalizationParams,
    PatchSpec,
    binarize,
    center_crop_region,
    fingerprint_bounding_region,
    normalize,
)
from .errors import (
    EmptyDatabase,
    MalformedPlan,
    PatchLargerThanArea,
    PipelineError,
    UnknownPreset,
    VerifyCountTooLarge,
)
from .geometry import RotationAugment, ShiftAugment, patch_region
from .raster import GrayImage, Region, crop, fit_region, load_image, save_image

log = logging.getLogger(__name__)

FILENAME_RE = re.compile(r"^(\d+)_(\d+)\.(bmp|png|pgm|tif|tiff)$", re.IGNORECASE)
OUTPUT_NAME_RE = re.compile(r"^\d+_\d+\.bmp$")

OP_KINDS = ("rotate", "shift", "stretch", "equalize", "uniform_noise", "area_noise")
NOISE_KINDS = ("uniform_noise", "area_noise")

MANIFEST_NAME = "manifest.jsonl"
REJECTIONS_NAME = "rejections.log"

# parameter pools for plan-driven sampling (brightness targets step 10)
STRETCH_T_MIN_CHOICES = tuple(range(0, 51, 10))
STRETCH_T_MAX_CHOICES = tuple(range(205, 256, 10))


@dataclass(frozen=True)
class SourceDatabase:
    """Impressions grouped per finger, each a sorted (impression_id, path) list."""

    fingers: dict
    skipped: int = 0

    def total_images(self) -> int:
        return sum(len(v) for v in self.fingers.values())


@dataclass(frozen=True)
class AugmentPlan:
    """Per-source-image augmentation recipe.

    ``chains`` holds one op-kind sequence per output patch; single-element
    chains are plain augments, longer ones are combined augments.
    """

    per_image_count: int
    chains: tuple
    noise_fraction_max: float = 0.30
    random_area_share: float = 0.60

    def __post_init__(self):
        if len(self.chains) != self.per_image_count:
            raise MalformedPlan("chains length must equal per_image_count")
        for chain in self.chains:
            for kind in chain:
                if kind not in OP_KINDS:
                    raise MalformedPlan(f"unknown op kind {kind!r}")
        noisy = self.noisy_count
        if noisy:
            slack = self.noise_fraction_max + 1.0 / self.per_image_count
            if noisy / self.per_image_count > slack + 1e-9:
                raise MalformedPlan(
                    f"{noisy}/{self.per_image_count} noisy exceeds the "
                    f"{self.noise_fraction_max:.0%} guidance"
                )
            expected_area = round(self.random_area_share * noisy)
            if self.random_area_count != expected_area:
                raise MalformedPlan(
                    f"random-area count {self.random_area_count} != "
                    f"round({self.random_area_share} * {noisy})"
                )

    @property
    def mix(self) -> Counter:
        out = Counter()
        for chain in self.chains:
            out[chain[0] if len(chain) == 1 else "combined"] += 1
        return out

    @property
    def noisy_count(self) -> int:
        return sum(1 for c in self.chains if any(k in NOISE_KINDS for k in c))

    @property
    def random_area_count(self) -> int:
        return sum(1 for c in self.chains if "area_noise" in c)

    def to_json(self) -> dict:
        return {
            "per_image_count": self.per_image_count,
            "chains": [list(c) for c in self.chains],
            "noise_fraction_max": self.noise_fraction_max,
            "random_area_share": self.random_area_share,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AugmentPlan":
        return cls(
            per_image_count=int(obj["per_image_count"]),
            chains=tuple(tuple(c) for c in obj["chains"]),
            noise_fraction_max=float(obj.get("noise_fraction_max", 0.30)),
            random_area_share=float(obj.get("random_area_share", 0.60)),
        )


COMBINED_CHAINS = (
    ("rotate", "shift"),
    ("rotate", "stretch"),
    ("shift", "equalize"),
    ("rotate", "shift", "stretch"),
)


def preset_plan(name: str) -> AugmentPlan:
    """The three dataset recipes: 50 single-op patches per image; 30 combined;
    30 combined of which 10 noisy (6 of them random-area)."""
    if name == "dataset1":
        chains = (
            [("rotate",)] * 10
            + [("shift",)] * 10
            + [("stretch",)] * 8
            + [("equalize",)] * 7
            + [("uniform_noise",)] * 6
            + [("area_noise",)] * 9
        )
        return AugmentPlan(per_image_count=50, chains=tuple(chains))
    if name == "dataset2":
        chains = [COMBINED_CHAINS[i % len(COMBINED_CHAINS)] for i in range(30)]
        return AugmentPlan(per_image_count=30, chains=tuple(chains))
    if name == "dataset3":
        chains = [COMBINED_CHAINS[i % len(COMBINED_CHAINS)] for i in range(20)]
        chains += [("rotate", "shift", "uniform_noise")] * 4
        chains += [("rotate", "shift", "area_noise")] * 6
        return AugmentPlan(
            per_image_count=30, chains=tuple(chains), noise_fraction_max=1 / 3
        )
    raise UnknownPreset(f"unknown preset {name!r}")


@dataclass
class ManifestEntry:
    output_file: str
    finger_id: int
    impression_id: int
    source_file: str
    region: Region
    base_angle: float  # alignment rotation applied before the chain
    chain: list  # list of {"op": kind, ...params}
    item_seed: int
    split: str = "train"

    def to_json(self) -> dict:
        return {
            "output_file": self.output_file,
            "finger_id": self.finger_id,
            "impression_id": self.impression_id,
            "source_file": self.source_file,
            "region": [self.region.x, self.region.y, self.region.w, self.region.h],
            "base_angle": self.base_angle,
            "chain": self.chain,
            "item_seed": self.item_seed,
            "split": self.split,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ManifestEntry":
        x, y, w, h = obj["region"]
        return cls(
            output_file=obj["output_file"],
            finger_id=int(obj["finger_id"]),
            impression_id=int(obj["impression_id"]),
            source_file=obj["source_file"],
            region=Region(int(x), int(y), int(w), int(h)),
            base_angle=float(obj["base_angle"]),
            chain=obj["chain"],
            item_seed=int(obj["item_seed"]),
            split=obj.get("split", "train"),
        )

    @property
    def is_noisy(self) -> bool:
        return any(op["op"] in NOISE_KINDS for op in self.chain)

    @property
    def is_random_area(self) -> bool:
        return any(op["op"] == "area_noise" for op in self.chain)


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    rejections: list = field(default_factory=list)  # (finger, impression, score)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(ManifestEntry.from_json(json.loads(line)))
        return cls(entries=entries)


def scan_database(directory, pattern: re.Pattern = FILENAME_RE) -> SourceDatabase:
    """Group ``<finger>_<impression>.<ext>`` files per finger."""
    directory = Path(directory)
    fingers: dict = {}
    skipped = 0
    for path in sorted(directory.iterdir()):
        if not path.is_file():
            continue
        m = pattern.match(path.name)
        if not m:
            skipped += 1
            log.warning("skipping unrecognised filename %s", path.name)
            continue
        finger, impression = int(m.group(1)), int(m.group(2))
        fingers.setdefault(finger, []).append((impression, path))
    for group in fingers.values():
        group.sort(key=lambda pair: pair[0])
    if not fingers:
        raise EmptyDatabase(f"no usable images under {directory}")
    return SourceDatabase(fingers=fingers, skipped=skipped)


def select_reference(group: list) -> tuple:
    """Deterministic reference pick: the lowest impression id."""
    if not group:
        raise ValueError("empty impression group")
    return min(group, key=lambda pair: pair[0])


def item_seed(global_seed: int, finger_id: int, impression_id: int, index: int) -> int:
    """Stable 64-bit per-item seed decoupling determinism from scheduling."""
    digest = hashlib.blake2b(
        f"{global_seed}:{finger_id}:{impression_id}:{index}".encode(),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "big")


def sample_chain(kinds, spec: PatchSpec, rng: np.random.Generator) -> list:
    """Draw concrete parameters for each op kind; the result fully
    determines the output patch (noise ops carry their own sub-seed)."""
    ops = []
    for kind in kinds:
        if kind == "rotate":
            ops.append({"op": "rotate", "angle": float(rng.integers(0, 360))})
        elif kind == "shift":
            sh = geometry.sample_shift(spec, rng)
            ops.append({"op": "shift", "dx": sh.dx, "dy": sh.dy})
        elif kind == "stretch":
            ops.append(
                {
                    "op": "stretch",
                    "t_min": int(rng.choice(STRETCH_T_MIN_CHOICES)),
                    "t_max": int(rng.choice(STRETCH_T_MAX_CHOICES)),
                }
            )
        elif kind == "equalize":
            ops.append({"op": "equalize", "q0": 0, "qk": 255})
        elif kind == "uniform_noise":
            ops.append(
                {
                    "op": "uniform_noise",
                    "a": -32,
                    "b": 32,
                    "seed": int(rng.integers(0, 2**63)),
                }
            )
        elif kind == "area_noise":
            ops.append(
                {
                    "op": "area_noise",
                    "window": 16,
                    "threshold": 64.0,
                    "diameter": 32,
                    "count": 4,
                    "seed": int(rng.integers(0, 2**63)),
                }
            )
        else:
            raise MalformedPlan(f"unknown op kind {kind!r}")
    return ops


def apply_chain(
    img: GrayImage,
    region: Region,
    spec: PatchSpec,
    base_angle: float,
    ops: list,
) -> GrayImage:
    """Replay a fully-parameterised chain against a source image.

    Geometric ops choose how the patch is cut (shift moves the center,
    rotation goes through the enlarged-square path, composed with the
    alignment base angle); photometric and noise ops then transform the cut
    patch in chain order.
    """
    cx, cy = region.center
    angle = base_angle
    for op in ops:
        if op["op"] == "rotate":
            angle = (angle + op["angle"]) % 360.0
        elif op["op"] == "shift":
            cx += op["dx"]
            cy += op["dy"]
    angle %= 360.0

    if angle != 0.0:
        patch = geometry.rotated_patch(img, (cx, cy), spec, RotationAugment(angle))
    else:
        patch = crop(
            img, fit_region(patch_region((cx, cy), spec), img.width, img.height)
        )

    for op in ops:
        kind = op["op"]
        if kind in ("rotate", "shift"):
            continue
        if kind == "stretch":
            patch = photometric.stretch(
                patch, photometric.StretchParams(op["t_min"], op["t_max"])
            )
        elif kind == "equalize":
            patch = photometric.equalize(
                patch, photometric.EqualizeParams(op["q0"], op["qk"])
            )
        elif kind == "uniform_noise":
            patch = noise.add_uniform_noise(
                patch,
                noise.UniformNoiseParams(op["a"], op["b"]),
                np.random.default_rng(op["seed"]),
            )
        elif kind == "area_noise":
            outcome = noise.random_area_noise(
                patch,
                noise.RandomAreaNoiseParams(
                    window=op["window"],
                    dense_threshold=op["threshold"],
                    circle_diameter=op["diameter"],
                    circle_count=op["count"],
                ),
                np.random.default_rng(op["seed"]),
            )
            patch = outcome.image
        else:
            raise MalformedPlan(f"unknown op kind {kind!r}")
    return patch


def reference_region(img: GrayImage, spec: PatchSpec) -> Region:
    """Patch region centered on the detected fingerprint area.

    If the area is smaller than the patch the region is still patch-sized,
    centered on the area and nudged into image bounds (never shrunk).
    """
    norm = normalize(img, NormalizationParams())
    fp = fingerprint_bounding_region(binarize(norm))
    try:
        region = center_crop_region(fp, spec)
    except PatchLargerThanArea:
        log.warning("fingerprint area %s smaller than patch; clamping", fp)
        region = patch_region(fp.center, spec)
    return fit_region(region, img.width, img.height)


def replay_entry(entry: ManifestEntry, spec: PatchSpec) -> GrayImage:
    """Re-derive a patch from its manifest record; must match the file bytes."""
    src = load_image(entry.source_file)
    return apply_chain(src, entry.region, spec, entry.base_angle, entry.chain)


def _emit_for_impression(
    img: GrayImage,
    region: Region,
    base_angle: float,
    finger_id: int,
    impression_id: int,
    source_file: str,
    plan: AugmentPlan,
    spec: PatchSpec,
    seed: int,
    outdir: Path,
) -> list:
    entries = []
    for index, kinds in enumerate(plan.chains):
        iseed = item_seed(seed, finger_id, impression_id, index)
        ops = sample_chain(kinds, spec, np.random.default_rng(iseed))
        patch = apply_chain(img, region, spec, base_angle, ops)
        sequence = impression_id * plan.per_image_count + index
        name = f"{finger_id}_{sequence}.bmp"
        save_image(patch, outdir / name)
        entries.append(
            ManifestEntry(
                output_file=name,
                finger_id=finger_id,
                impression_id=impression_id,
                source_file=source_file,
                region=region,
                base_angle=base_angle,
                chain=ops,
                item_seed=iseed,
            )
        )
    return entries


def build_dataset(
    db: SourceDatabase,
    plan: AugmentPlan,
    spec: PatchSpec = PatchSpec(),
    sp: AlignSearchParams = AlignSearchParams(),
    seed: int = 0,
    outdir=".",
    jobs: int = 1,
) -> Manifest:
    """Run the full pipeline over every finger and impression.

    Per-image failures are logged and skipped; rejected extras are recorded
    with their best score. Output bytes depend only on (db, plan, spec, sp,
    seed), never on scheduling.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    tasks = []  # (finger, impression, path, template_or_none, region_or_none)
    for finger_id in sorted(db.fingers):
        group = db.fingers[finger_id]
        ref_impression, ref_path = select_reference(group)
        try:
            ref_img = load_image(ref_path)
            ref_region = reference_region(ref_img, spec)
        except PipelineError as exc:
            log.warning("finger %s reference %s failed: %s", finger_id, ref_path, exc)
            continue
        ref_norm = normalize(ref_img, NormalizationParams())
        template = ReferenceTemplate(patch=crop(ref_norm, ref_region), finger_id=finger_id)
        tasks.append(("ref", finger_id, ref_impression, ref_path, ref_img, ref_region))
        for impression_id, path in group:
            if impression_id == ref_impression:
                continue
            tasks.append(("extra", finger_id, impression_id, path, template, None))

    def run_task(task):
        kind, finger_id, impression_id, path, payload, region = task
        try:
            if kind == "ref":
                img, base_angle = payload, 0.0
            else:
                img = load_image(path)
                outcome = best_matching_region(img, payload, spec, sp)
                if isinstance(outcome, Rejected):
                    return ("rejected", finger_id, impression_id, outcome.best.score)
                region, base_angle = outcome.region, outcome.angle % 360.0
            entries = _emit_for_impression(
                img, region, base_angle, finger_id, impression_id,
                str(path), plan, spec, seed, outdir,
            )
            return ("ok", entries)
        except PipelineError as exc:
            log.warning(
                "finger %s impression %s failed: %s", finger_id, impression_id, exc
            )
            return ("failed", finger_id, impression_id, str(exc))

    manifest = Manifest()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = [run_task(t) for t in tasks]

    for result in results:
        if result[0] == "ok":
            manifest.entries.extend(result[1])
        elif result[0] == "rejected":
            manifest.rejections.append(result[1:])

    manifest.entries.sort(key=lambda e: e.output_file)
    manifest.rejections.sort()
    manifest.save(outdir / MANIFEST_NAME)
    with open(outdir / REJECTIONS_NAME, "w", encoding="utf-8") as fh:
        for finger_id, impression_id, score in manifest.rejections:
            fh.write(f"{finger_id} {impression_id} {score:.6f}\n")
    return manifest


def split_train_verify(manifest: Manifest, verify_count: int, seed: int) -> Manifest:
    """Label a verify subset, sampled without replacement and stratified so
    every finger keeps at least one training entry."""
    total = len(manifest.entries)
    if verify_count >= total:
        raise VerifyCountTooLarge(f"verify {verify_count} >= total {total}")
    train_left = Counter(e.finger_id for e in manifest.entries)
    if verify_count > total - len(train_left):
        raise VerifyCountTooLarge(
            "verify count leaves some finger without training entries"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(total)
    chosen = set()
    for idx in order:
        if len(chosen) == verify_count:
            break
        entry = manifest.entries[idx]
        if train_left[entry.finger_id] > 1:
            chosen.add(int(idx))
            train_left[entry.finger_id] -= 1
    for i, entry in enumerate(manifest.entries):
        entry.split = "verify" if i in chosen else "train"
    return manifest


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    files_checked: int = 0
    replayed: int = 0
    noisy_fraction: dict = field(default_factory=dict)  # per finger
    random_area_share: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [
            f"files checked: {self.files_checked}",
            f"entries replayed: {self.replayed}",
        ]
        for finger in sorted(self.noisy_fraction):
            lines.append(
                f"finger {finger}: noisy {self.noisy_fraction[finger]:.3f}, "
                f"random-area share {self.random_area_share[finger]:.3f}"
            )
        if self.violations:
            lines.append(f"violations ({len(self.violations)}):")
            lines.extend(f"  {v}" for v in self.violations)
        else:
            lines.append("violations: none")
        return "\n".join(lines)


def validate_dataset(
    outdir,
    manifest: Manifest,
    spec: PatchSpec = PatchSpec(),
    plan: AugmentPlan = None,
    replay_samples: int = 20,
    seed: int = 0,
) -> ValidationReport:
    """Consistency audit: names, dimensions, manifest/file agreement, noise
    ratios and a seeded replay spot-check."""
    outdir = Path(outdir)
    report = ValidationReport()
    listed = {e.output_file for e in manifest.entries}
    if len(listed) != len(manifest.entries):
        report.violations.append("duplicate output filenames in manifest")

    on_disk = {p.name for p in outdir.glob("*.bmp")}
    for name in sorted(listed - on_disk):
        report.violations.append(f"missing file: {name}")
    for name in sorted(on_disk - listed):
        report.violations.append(f"unlisted file: {name}")

    for entry in manifest.entries:
        if not OUTPUT_NAME_RE.match(entry.output_file):
            report.violations.append(f"bad filename: {entry.output_file}")
        path = outdir / entry.output_file
        if path.exists():
            img = load_image(path)
            report.files_checked += 1
            if img.width != spec.width or img.height != spec.height:
                report.violations.append(
                    f"{entry.output_file}: size {img.width}x{img.height}, "
                    f"expected {spec.width}x{spec.height}"
                )

    per_finger = {}
    for entry in manifest.entries:
        bucket = per_finger.setdefault(entry.finger_id, [0, 0, 0])
        bucket[0] += 1
        if entry.is_noisy:
            bucket[1] += 1
        if entry.is_random_area:
            bucket[2] += 1
    for finger, (total, noisy, area) in per_finger.items():
        report.noisy_fraction[finger] = noisy / total
        report.random_area_share[finger] = area / noisy if noisy else 0.0
        if plan is not None:
            slack = plan.noise_fraction_max + 1.0 / plan.per_image_count
            if noisy / total > slack + 1e-9:
                report.violations.append(
                    f"finger {finger}: noisy fraction {noisy / total:.3f} over plan"
                )
            expected_share = plan.random_area_share
            if noisy and abs(area / noisy - expected_share) > 1.0 / noisy:
                report.violations.append(
                    f"finger {finger}: random-area share {area / noisy:.3f} "
                    f"!= plan {expected_share:.3f}"
                )

    if manifest.entries and replay_samples > 0:
        rng = np.random.default_rng(seed)
        count = min(replay_samples, len(manifest.entries))
        picks = rng.choice(len(manifest.entries), size=count, replace=False)
        for idx in picks:
            entry = manifest.entries[int(idx)]
            path = outdir / entry.output_file
            if not path.exists() or not Path(entry.source_file).exists():
                continue
            expected = replay_entry(entry, spec)
            actual = load_image(path)
            report.replayed += 1
            if expected != actual:
                report.violations.append(f"{entry.output_file}: replay mismatch")
    return report
