"""Command-line front door: extract, augment, build, validate.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 validation
violations. Progress goes to stderr, machine-readable summaries to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import builder
from .align import AlignSearchParams
from .area import PatchSpec
from .errors import (
    EmptyDatabase,
    IoFailure,
    NoFingerprintArea,
    PipelineError,
    UnknownPreset,
)
from .raster import crop, load_image, save_image

DEFAULT_SEED = 20020213  # fixed so undocumented runs are still reproducible

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3


def _patch_spec(size: int) -> PatchSpec:
    return PatchSpec(width=size, height=size)


def cmd_extract(args) -> int:
    try:
        img = load_image(args.image)
        region = builder.reference_region(img, _patch_spec(args.size))
        patch = crop(img, region)
        save_image(patch, args.out)
    except NoFingerprintArea as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE  # nothing extractable
    except (IoFailure, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"region x={region.x} y={region.y} w={region.w} h={region.h}")
    return EXIT_OK


def _parse_chain(spec_string: str) -> tuple:
    alias = {
        "rotate": "rotate",
        "shift": "shift",
        "stretch": "stretch",
        "equalize": "equalize",
        "uniform-noise": "uniform_noise",
        "area-noise": "area_noise",
    }
    kinds = []
    for token in spec_string.split("+"):
        token = token.strip()
        if token not in alias:
            raise ValueError(f"unknown op {token!r}")
        kinds.append(alias[token])
    return tuple(kinds)


def cmd_augment(args) -> int:
    try:
        kinds = _parse_chain(args.op)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        img = load_image(args.image)
        spec = _patch_spec(args.size)
        region = builder.reference_region(img, spec)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.image).stem

        written = 0
        if args.angles is not None and kinds == ("rotate",):
            angles = [float(a) for a in args.angles.split(",")]
            for i, angle in enumerate(angles):
                ops = [{"op": "rotate", "angle": angle % 360.0}]
                patch = builder.apply_chain(img, region, spec, 0.0, ops)
                save_image(patch, outdir / f"{stem}_rot{i}.bmp")
                written += 1
        else:
            for i in range(args.count):
                iseed = builder.item_seed(args.seed, 0, 0, i)
                ops = builder.sample_chain(kinds, spec, np.random.default_rng(iseed))
                if kinds == ("area_noise",):
                    # skip emission when the blot found no dense tile
                    from . import noise as noise_mod

                    patch = builder.apply_chain(img, region, spec, 0.0, ops[:-1])
                    outcome = noise_mod.random_area_noise(
                        patch,
                        noise_mod.RandomAreaNoiseParams(),
                        np.random.default_rng(ops[-1]["seed"]),
                    )
                    if not outcome.applied:
                        print(
                            "warning: no dense area for random-area noise; skipped",
                            file=sys.stderr,
                        )
                        continue
                    patch = outcome.image
                else:
                    patch = builder.apply_chain(img, region, spec, 0.0, ops)
                save_image(patch, outdir / f"{stem}_{i}.bmp")
                written += 1
    except NoFingerprintArea as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IoFailure, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"written {written}")
    return EXIT_OK


def cmd_build(args) -> int:
    try:
        if args.plan_file:
            with open(args.plan_file, "r", encoding="utf-8") as fh:
                plan = builder.AugmentPlan.from_json(json.load(fh))
        else:
            plan = builder.preset_plan(args.preset)
    except UnknownPreset as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    spec = _patch_spec(args.size)
    sp = AlignSearchParams(accept_threshold=args.align_threshold)
    try:
        db = builder.scan_database(args.input)
        print(
            f"fingers={len(db.fingers)} images={db.total_images()} "
            f"skipped={db.skipped}",
            file=sys.stderr,
        )
        manifest = builder.build_dataset(
            db, plan, spec, sp, seed=args.seed, outdir=args.output, jobs=args.jobs
        )
        if args.verify_count:
            builder.split_train_verify(manifest, args.verify_count, args.seed)
            manifest.save(Path(args.output) / builder.MANIFEST_NAME)
    except EmptyDatabase as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    train = sum(1 for e in manifest.entries if e.split == "train")
    verify = len(manifest.entries) - train
    print(
        f"fingers={len(db.fingers)} outputs={len(manifest.entries)} "
        f"train={train} verify={verify} rejected={len(manifest.rejections)} "
        f"noisy_per_image={plan.noisy_count}/{plan.per_image_count} "
        f"area_noise_per_image={plan.random_area_count}/{max(plan.noisy_count, 1)}"
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    manifest_path = Path(args.outdir) / builder.MANIFEST_NAME
    if not manifest_path.exists():
        print(f"error: {manifest_path} not found", file=sys.stderr)
        return EXIT_IO
    try:
        manifest = builder.Manifest.load(manifest_path)
        report = builder.validate_dataset(
            args.outdir, manifest, _patch_spec(args.size)
        )
    except (OSError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpaug",
        description="Build small-area fingerprint training datasets "
        "from a full-area fingerprint database.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract the centered fingerprint patch")
    p.add_argument("image")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("augment", help="apply one augmentation op or chain")
    p.add_argument("image")
    p.add_argument("--op", required=True, help="op name or '+'-joined chain")
    p.add_argument("--angles", help="comma list of degrees (rotate only)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("build", help="run the full dataset build")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=["dataset1", "dataset2", "dataset3"])
    group.add_argument("--plan-file")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--verify-count", type=int, default=0)
    p.add_argument("--align-threshold", type=float, default=0.35)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("validate", help="audit a built dataset")
    p.add_argument("outdir")
    p.add_argument("--size", type=int, default=128)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING)
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
