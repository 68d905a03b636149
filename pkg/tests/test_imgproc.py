"""Image primitives: loading, Otsu, projections, strips."""

import io

import numpy as np
import pytest
from PIL import Image

from oracles import naive_projection
from scribeid import imgproc
from scribeid.errors import FormatError


def _png_bytes(arr, mode="L"):
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


class TestLoadPage:
    def test_single_white_pixel_png(self, tmp_path):
        path = tmp_path / "one.png"
        path.write_bytes(_png_bytes(np.full((1, 1), 255, np.uint8)))
        img = imgproc.load_page(path)
        assert img.shape == (1, 1) and img[0, 0] == 255

    def test_checkerboard_pgm_roundtrip(self, tmp_path):
        path = tmp_path / "check.pgm"
        # Binary P5, maxval 255, 2x2 checkerboard.
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0]))
        img = imgproc.load_page(path)
        np.testing.assert_array_equal(img, [[0, 255], [255, 0]])

    def test_decodes_pixel_for_pixel(self, tmp_path):
        rng = np.random.default_rng(0)
        original = rng.integers(0, 256, (37, 53), dtype=np.uint8)
        path = tmp_path / "page.png"
        path.write_bytes(_png_bytes(original))
        np.testing.assert_array_equal(imgproc.load_page(path), original)

    def test_color_uses_bt601_luminance(self, tmp_path):
        rgb = np.zeros((2, 2, 3), np.uint8)
        rgb[..., 0] = 200  # pure red
        path = tmp_path / "red.png"
        path.write_bytes(_png_bytes(rgb, mode="RGB"))
        img = imgproc.load_page(path)
        assert img[0, 0] == round(0.299 * 200)

    def test_unsupported_format_raises(self, tmp_path):
        path = tmp_path / "page.jpg"
        buf = io.BytesIO()
        Image.fromarray(np.zeros((4, 4), np.uint8)).save(buf, format="JPEG")
        path.write_bytes(buf.getvalue())
        with pytest.raises(FormatError):
            imgproc.load_page(path)

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(OSError):
            imgproc.load_page(tmp_path / "nope.png")

    def test_garbage_is_format_error(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not an image at all")
        with pytest.raises(FormatError):
            imgproc.load_page(path)

    def test_save_roundtrip_both_formats(self, tmp_path):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 256, (11, 7), dtype=np.uint8)
        for name in ("a.png", "a.pgm"):
            imgproc.save_page(img, tmp_path / name)
            np.testing.assert_array_equal(imgproc.load_page(tmp_path / name), img)


class TestBinarize:
    def test_constant_image_all_background(self):
        assert not imgproc.binarize(np.full((5, 5), 255, np.uint8)).any()
        assert not imgproc.binarize(np.zeros((5, 5), np.uint8)).any()

    def test_bimodal_split(self):
        img = np.zeros((4, 4), np.uint8)
        img[:2] = 255
        mask = imgproc.binarize(img)
        np.testing.assert_array_equal(mask, img == 0)

    def test_mask_rendering_roundtrip(self, rng):
        mask = rng.random((20, 30)) < 0.3
        mask[0, 0] = True  # both values present
        mask[-1, -1] = False
        rendered = np.where(mask, 0, 255).astype(np.uint8)
        np.testing.assert_array_equal(imgproc.binarize(rendered), mask)

    def test_synthetic_page_ink_count(self, benchmark_pages):
        pages, truths = benchmark_pages
        page = pages["w0"][0]
        gt = truths["w0"][0]
        got = imgproc.binarize(page).sum()
        want = gt.ink_mask.sum()
        assert abs(got - want) <= 0.01 * want


class TestProjection:
    def test_empty_mask(self):
        mask = np.zeros((4, 6), bool)
        assert imgproc.projection(mask, imgproc.HORIZONTAL).sum() == 0
        assert imgproc.projection(mask, imgproc.VERTICAL).sum() == 0

    def test_single_full_row(self):
        mask = np.zeros((5, 9), bool)
        mask[3] = True
        prof = imgproc.projection(mask, imgproc.HORIZONTAL)
        assert prof[3] == 9 and prof.sum() == 9

    def test_random_mask_matches_double_loop(self, rng):
        mask = rng.random((16, 16)) < 0.4
        for axis in (imgproc.HORIZONTAL, imgproc.VERTICAL):
            np.testing.assert_array_equal(
                imgproc.projection(mask, axis), naive_projection(mask, axis)
            )

    def test_conservation(self, rng):
        img = (rng.random((12, 18)) * 255).astype(np.uint8)
        mask = imgproc.binarize(img)
        total = mask.sum()
        assert imgproc.projection(mask, imgproc.HORIZONTAL).sum() == total
        assert imgproc.projection(mask, imgproc.VERTICAL).sum() == total

    def test_bad_axis(self):
        with pytest.raises(ValueError):
            imgproc.projection(np.zeros((2, 2), bool), "diagonal")


class TestSplitStrips:
    def test_identity_with_one_strip(self, rng):
        img = (rng.random((6, 10)) * 255).astype(np.uint8)
        strips = imgproc.split_strips(img, 1)
        assert len(strips) == 1
        np.testing.assert_array_equal(strips[0], img)

    def test_remainder_to_leftmost(self):
        img = np.zeros((2, 10), np.uint8)
        widths = [s.shape[1] for s in imgproc.split_strips(img, 3)]
        assert widths == [4, 3, 3]

    def test_exact_reassembly_800_by_8(self, rng):
        img = (rng.random((20, 800)) * 255).astype(np.uint8)
        strips = imgproc.split_strips(img, 8)
        assert all(s.shape[1] == 100 for s in strips)
        np.testing.assert_array_equal(np.hstack(strips), img)

    def test_reassembly_all_counts(self, rng):
        img = (rng.random((4, 13)) * 255).astype(np.uint8)
        for n in range(1, 14):
            np.testing.assert_array_equal(
                np.hstack(imgproc.split_strips(img, n)), img
            )

    def test_count_out_of_range(self):
        img = np.zeros((2, 5), np.uint8)
        with pytest.raises(ValueError):
            imgproc.split_strips(img, 6)
        with pytest.raises(ValueError):
            imgproc.split_strips(img, 0)
