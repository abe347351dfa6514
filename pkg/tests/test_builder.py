import shutil

import numpy as np
import pytest

from fpaug.align import AlignSearchParams
from fpaug.area import PatchSpec
from fpaug.builder import (
    AugmentPlan,
    Manifest,
    build_dataset,
    item_seed,
    preset_plan,
    replay_entry,
    scan_database,
    select_reference,
    split_train_verify,
    validate_dataset,
)
from fpaug.errors import (
    EmptyDatabase,
    MalformedPlan,
    UnknownPreset,
    VerifyCountTooLarge,
)
from fpaug.raster import GrayImage, load_image, save_image

from conftest import make_db, make_impression

SPEC = PatchSpec(64, 64)
SP = AlignSearchParams(coarse_stride=8, refine_radius=8, angle_set=(-4, -2, 0, 2, 4))


def small_plan(n=4):
    chains = (("rotate",), ("shift",), ("stretch",), ("rotate", "shift"))[:n]
    return AugmentPlan(per_image_count=n, chains=chains)


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    """One shared build: 4 fingers x 3 impressions, 4 patches per image."""
    root = tmp_path_factory.mktemp("built")
    db_dir = root / "db"
    db_dir.mkdir()
    make_db(db_dir, fingers=4, impressions=3, size=160)
    out = root / "out"
    db = scan_database(db_dir)
    manifest = build_dataset(db, small_plan(), SPEC, SP, seed=1, outdir=out)
    return db_dir, out, manifest


def copy_of(built, tmp_path):
    db_dir, out, _ = built
    out2 = tmp_path / "out"
    shutil.copytree(out, out2)
    return db_dir, out2, Manifest.load(out2 / "manifest.jsonl")


class TestScan:
    def test_groups_by_finger(self, tiny_db):
        db = scan_database(tiny_db)
        assert len(db.fingers) == 4
        assert all(len(group) == 3 for group in db.fingers.values())
        assert [imp for imp, _ in db.fingers[1]] == [1, 2, 3]

    def test_malformed_names_skipped(self, tiny_db):
        (tiny_db / "README.txt").write_text("not an image")
        (tiny_db / "fingerprint.bmp").write_bytes(b"junk")
        db = scan_database(tiny_db)
        assert db.skipped == 2
        assert len(db.fingers) == 4

    def test_empty_dir(self, tmp_path):
        with pytest.raises(EmptyDatabase):
            scan_database(tmp_path)

    def test_fvc_style_names(self, tmp_path):
        img = make_impression(1, size=64)
        for i in range(1, 9):
            save_image(img, tmp_path / f"110_{i}.bmp")
        db = scan_database(tmp_path)
        assert list(db.fingers) == [110]
        assert len(db.fingers[110]) == 8


class TestSelectReference:
    def test_min_rule(self):
        group = [(3, "c"), (1, "a"), (7, "g")]
        assert select_reference(group) == (1, "a")

    def test_singleton(self):
        assert select_reference([(5, "e")]) == (5, "e")


class TestPresets:
    def test_dataset1_counts(self):
        plan = preset_plan("dataset1")
        assert plan.per_image_count == 50
        assert all(len(c) == 1 for c in plan.chains)
        assert plan.noisy_count == 15  # 30% cap
        assert plan.random_area_count == 9  # 60% of noisy

    def test_dataset2_combined(self):
        plan = preset_plan("dataset2")
        assert plan.per_image_count == 30
        assert all(len(c) >= 2 for c in plan.chains)
        assert plan.noisy_count == 0

    def test_dataset3_composition(self):
        plan = preset_plan("dataset3")
        assert plan.per_image_count == 30
        assert plan.noisy_count == 10
        assert plan.random_area_count == 6

    def test_unknown(self):
        with pytest.raises(UnknownPreset):
            preset_plan("dataset9")

    def test_full_database_arithmetic(self):
        # 2720 source images: 50/image and 30/image recipes land exactly on
        # the published train+verify totals
        assert 2720 * preset_plan("dataset1").per_image_count == 136_000
        assert 136_000 == 135_000 + 1_000
        assert 2720 * preset_plan("dataset2").per_image_count == 81_600
        assert 81_600 == 80_600 + 1_000

    def test_ratio_invariants_enforced(self):
        with pytest.raises(MalformedPlan):
            AugmentPlan(per_image_count=2, chains=(("rotate",),))
        with pytest.raises(MalformedPlan):
            # 3/4 noisy blows the 30% guidance
            AugmentPlan(
                per_image_count=4,
                chains=(
                    ("uniform_noise",),
                    ("uniform_noise",),
                    ("area_noise",),
                    ("rotate",),
                ),
            )


class TestItemSeed:
    def test_stable(self):
        assert item_seed(1, 2, 3, 4) == item_seed(1, 2, 3, 4)

    def test_distinct(self):
        seeds = {
            item_seed(7, f, i, k)
            for f in range(4)
            for i in range(4)
            for k in range(10)
        }
        assert len(seeds) == 160


class TestBuild:
    def test_counts_and_sizes(self, built):
        _, out, manifest = built
        assert len(manifest.entries) == 4 * 3 * 4  # fingers x impressions x plan
        assert not manifest.rejections
        for entry in manifest.entries[:8]:
            img = load_image(out / entry.output_file)
            assert (img.width, img.height) == (64, 64)

    def test_filenames_match_scheme(self, built):
        _, _, manifest = built
        names = {e.output_file for e in manifest.entries}
        expected = {
            f"{f}_{imp * 4 + k}.bmp"
            for f in range(1, 5)
            for imp in range(1, 4)
            for k in range(4)
        }
        assert names == expected

    def test_same_seed_byte_identical_across_jobs(self, tiny_db, tmp_path):
        outs = []
        for jobs in (1, 4):
            out = tmp_path / f"out{jobs}"
            db = scan_database(tiny_db)
            build_dataset(db, small_plan(), SPEC, SP, seed=9, outdir=out, jobs=jobs)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0] == outs[1]

    def test_noise_reject_case(self, tiny_db, tmp_path):
        rng = np.random.default_rng(0)
        noise = GrayImage(rng.integers(0, 256, size=(192, 192)).astype(np.uint8))
        save_image(noise, tiny_db / "1_9.bmp")
        db = scan_database(tiny_db)
        out = tmp_path / "out"
        manifest = build_dataset(db, small_plan(), SPEC, SP, seed=2, outdir=out)
        assert manifest.rejections and manifest.rejections[0][:2] == (1, 9)
        assert all(
            not (e.finger_id == 1 and e.impression_id == 9)
            for e in manifest.entries
        )
        assert (out / "rejections.log").read_text().startswith("1 9 ")

    def test_replay_reproduces_bytes(self, built):
        _, out, manifest = built
        rng = np.random.default_rng(0)
        for idx in rng.choice(len(manifest.entries), size=10, replace=False):
            entry = manifest.entries[int(idx)]
            assert replay_entry(entry, SPEC) == load_image(out / entry.output_file)

    def test_manifest_round_trip(self, built):
        _, out, manifest = built
        loaded = Manifest.load(out / "manifest.jsonl")
        assert [e.to_json() for e in loaded.entries] == [
            e.to_json() for e in manifest.entries
        ]


class TestSplit:
    def test_counts(self, built, tmp_path):
        _, _, manifest = copy_of(built, tmp_path)
        split_train_verify(manifest, 10, seed=11)
        verify = [e for e in manifest.entries if e.split == "verify"]
        assert len(verify) == 10
        assert len(manifest.entries) - len(verify) == len(manifest.entries) - 10

    def test_stratified(self, built, tmp_path):
        _, _, manifest = copy_of(built, tmp_path)
        split_train_verify(manifest, len(manifest.entries) - 4, seed=12)
        train_fingers = {e.finger_id for e in manifest.entries if e.split == "train"}
        assert train_fingers == {e.finger_id for e in manifest.entries}

    def test_too_large(self, built, tmp_path):
        _, _, manifest = copy_of(built, tmp_path)
        with pytest.raises(VerifyCountTooLarge):
            split_train_verify(manifest, len(manifest.entries), seed=13)


class TestValidate:
    def test_fresh_build_clean(self, built):
        _, out, manifest = built
        report = validate_dataset(out, manifest, SPEC, plan=small_plan())
        assert report.ok, report.violations

    def test_missing_file_detected(self, built, tmp_path):
        _, out, manifest = copy_of(built, tmp_path)
        (out / manifest.entries[0].output_file).unlink()
        report = validate_dataset(out, manifest, SPEC, replay_samples=0)
        assert any("missing file" in v for v in report.violations)

    def test_unlisted_file_detected(self, built, tmp_path):
        _, out, manifest = copy_of(built, tmp_path)
        shutil.copy(
            out / manifest.entries[0].output_file, out / "999_0.bmp"
        )
        report = validate_dataset(out, manifest, SPEC, replay_samples=0)
        assert any("unlisted file" in v for v in report.violations)

    def test_tampered_file_detected(self, built, tmp_path):
        _, out, manifest = copy_of(built, tmp_path)
        victim = out / manifest.entries[0].output_file
        img = load_image(victim)
        tampered = img.pixels.copy()
        tampered[0, 0] ^= 0xFF
        save_image(GrayImage(tampered), victim)
        report = validate_dataset(
            out, manifest, SPEC, replay_samples=len(manifest.entries)
        )
        assert any("replay mismatch" in v for v in report.violations)
