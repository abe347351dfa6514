import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from fpaug.errors import NotGrayscale, RegionOutOfBounds, UnsupportedFormat
from fpaug.raster import (
    GrayImage,
    Region,
    crop,
    fit_region,
    load_image,
    rotate_about_center,
    save_image,
    stats,
)

from conftest import random_image


@st.composite
def gray_images(draw, max_side=24):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    data = draw(
        st.lists(st.integers(0, 255), min_size=w * h, max_size=w * h)
    )
    return GrayImage(np.array(data, dtype=np.uint8).reshape(h, w))


class TestIo:
    @settings(max_examples=30, deadline=None)
    @given(img=gray_images())
    def test_bmp_round_trip_bit_exact(self, img, tmp_path_factory):
        path = tmp_path_factory.mktemp("rt") / "img.bmp"
        save_image(img, path)
        assert load_image(path) == img

    def test_pgm_all_zero(self, tmp_path):
        path = tmp_path / "z.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(16))
        img = load_image(path)
        assert (img.width, img.height) == (4, 4)
        assert not img.pixels.any()

    def test_rgb_with_differing_channels_rejected(self, tmp_path):
        path = tmp_path / "c.png"
        arr = np.zeros((4, 4, 3), dtype=np.uint8)
        arr[..., 0], arr[..., 1], arr[..., 2] = 10, 20, 30
        Image.fromarray(arr).save(path)
        with pytest.raises(NotGrayscale):
            load_image(path)

    def test_rgb_with_equal_channels_accepted(self, tmp_path):
        path = tmp_path / "g.png"
        arr = np.full((4, 4, 3), 77, dtype=np.uint8)
        Image.fromarray(arr).save(path)
        assert np.all(load_image(path).pixels == 77)

    def test_unsupported_format(self, tmp_path):
        path = tmp_path / "x.bmp"
        path.write_bytes(b"this is not an image")
        with pytest.raises(UnsupportedFormat):
            load_image(path)

    def test_saved_patch_dimensions(self, tmp_path):
        rng = np.random.default_rng(7)
        img = random_image(rng, 128, 128)
        save_image(img, tmp_path / "p.bmp")
        back = load_image(tmp_path / "p.bmp")
        assert (back.width, back.height) == (128, 128)


class TestStats:
    def test_constant(self):
        s = stats(GrayImage(np.full((5, 5), 100, dtype=np.uint8)))
        assert s.mean == 100 and s.variance == 0

    def test_two_level(self):
        s = stats(GrayImage(np.array([[50, 150], [50, 150]], dtype=np.uint8)))
        assert s.mean == 100 and s.variance == 2500

    def test_extremes(self):
        s = stats(GrayImage(np.array([[0, 255]], dtype=np.uint8)))
        assert s.mean == 127.5 and s.variance == 16256.25

    def test_constant_shift_moves_mean_only(self):
        rng = np.random.default_rng(3)
        base = rng.integers(50, 150, size=(12, 12)).astype(np.uint8)
        s0 = stats(GrayImage(base))
        s1 = stats(GrayImage(base + 40))
        assert s1.mean == pytest.approx(s0.mean + 40)
        assert s1.variance == pytest.approx(s0.variance)


class TestCrop:
    def test_identity(self):
        rng = np.random.default_rng(1)
        img = random_image(rng, 6, 4)
        assert crop(img, Region(0, 0, 6, 4)) == img

    def test_interior(self):
        ramp = np.arange(16, dtype=np.uint8).reshape(4, 4)
        out = crop(GrayImage(ramp), Region(1, 1, 2, 2))
        assert np.array_equal(out.pixels, ramp[1:3, 1:3])

    def test_out_of_bounds(self):
        img = GrayImage(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(RegionOutOfBounds):
            crop(img, Region(2, 2, 4, 4))

    def test_nested_crops_compose(self):
        rng = np.random.default_rng(2)
        img = random_image(rng, 20, 20)
        a = Region(3, 4, 12, 10)
        b = Region(2, 1, 5, 6)
        composed = Region(a.x + b.x, a.y + b.y, b.w, b.h)
        assert crop(crop(img, a), b) == crop(img, composed)

    def test_fit_region_translates_minimally(self):
        assert fit_region(Region(-3, 5, 10, 10), 20, 20) == Region(0, 5, 10, 10)
        assert fit_region(Region(15, 15, 10, 10), 20, 20) == Region(10, 10, 10, 10)
        with pytest.raises(RegionOutOfBounds):
            fit_region(Region(0, 0, 30, 10), 20, 20)


class TestRotate:
    def test_angle_zero_identity(self):
        rng = np.random.default_rng(5)
        img = random_image(rng, 9, 7)
        assert rotate_about_center(img, 0) == img
        assert rotate_about_center(img, 360.0) == img

    def test_angle_90_matches_index_permutation(self):
        rng = np.random.default_rng(6)
        img = random_image(rng, 16, 16)
        expected = np.flipud(img.pixels.T)
        got = rotate_about_center(img, 90).pixels
        assert np.abs(got.astype(int) - expected.astype(int)).max() <= 1

    def test_double_180_restores_inscribed_disk(self):
        rng = np.random.default_rng(8)
        img = random_image(rng, 32, 32, low=60, high=200)
        twice = rotate_about_center(rotate_about_center(img, 180), 180)
        yy, xx = np.mgrid[0:32, 0:32].astype(float)
        disk = (xx - 15.5) ** 2 + (yy - 15.5) ** 2 <= 15.0**2
        diff = np.abs(
            twice.pixels.astype(float)[disk] - img.pixels.astype(float)[disk]
        )
        assert diff.mean() <= 2.0

    def test_rotate_then_back_preserves_disk(self):
        # smooth ridge-like content; bilinear error on white noise is unbounded
        from conftest import make_impression
        from fpaug.raster import crop as _crop

        img = _crop(make_impression(1, size=192), Region(76, 76, 40, 40))
        back = rotate_about_center(rotate_about_center(img, 33), -33)
        yy, xx = np.mgrid[0:40, 0:40].astype(float)
        disk = (xx - 19.5) ** 2 + (yy - 19.5) ** 2 <= 18.0**2
        diff = np.abs(
            back.pixels.astype(float)[disk] - img.pixels.astype(float)[disk]
        )
        assert diff.mean() <= 2.0
