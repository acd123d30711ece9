import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionforge.errors import BadFactorError, DimMismatchError, EmptyMaskError
from lesionforge.imaging import (
    BinaryMask,
    RasterImage,
    all_ones_mask,
    bbox,
    bilinear_resize_array,
    centroid,
    crop_to_bbox,
    dilate_mask,
    downsample_mask,
    empty_mask,
    ensure_same_shape,
    inside_distance,
    load_image,
    load_mask,
    quantize_intensities,
    resize_image,
    resize_mask_nearest,
    save_image,
    save_mask,
    translate_mask,
)

from helpers import random_mask, rng


class TestRasterImage:
    def test_grayscale_promoted_to_channel_axis(self):
        img = RasterImage(np.zeros((4, 5), dtype=np.float32))
        assert img.data.shape == (4, 5, 1)
        assert img.channels == 1

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            RasterImage(np.full((2, 2, 3), 1.5, dtype=np.float32))
        with pytest.raises(ValueError):
            RasterImage(np.full((2, 2, 3), -0.1, dtype=np.float32))

    def test_rejects_nan(self):
        arr = np.zeros((2, 2, 3), dtype=np.float32)
        arr[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            RasterImage(arr)

    def test_rejects_bad_channel_count(self):
        with pytest.raises(DimMismatchError):
            RasterImage(np.zeros((2, 2, 4), dtype=np.float32))

    def test_buffer_is_immutable(self):
        img = RasterImage(np.zeros((2, 2, 3), dtype=np.float32))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0


class TestBinaryMask:
    def test_bool_input_accepted(self):
        m = BinaryMask(np.ones((3, 3), dtype=bool))
        assert m.data.dtype == np.uint8
        assert m.foreground_count == 9

    def test_rejects_nonbinary_values(self):
        with pytest.raises(ValueError):
            BinaryMask(np.full((2, 2), 2, dtype=np.uint8))

    def test_rejects_wrong_rank(self):
        with pytest.raises(DimMismatchError):
            BinaryMask(np.zeros((2, 2, 1), dtype=np.uint8))

    def test_is_empty(self):
        assert empty_mask(3, 3).is_empty()
        assert not all_ones_mask(3, 3).is_empty()

    def test_ensure_same_shape(self):
        with pytest.raises(DimMismatchError):
            ensure_same_shape(empty_mask(2, 3), empty_mask(3, 2))


class TestCentroid:
    def test_single_pixel(self):
        m = np.zeros((5, 5), dtype=np.uint8)
        m[2, 3] = 1
        assert centroid(BinaryMask(m)) == (2.0, 3.0)

    def test_symmetric_block(self):
        m = np.zeros((6, 6), dtype=np.uint8)
        m[2:4, 1:5] = 1
        assert centroid(BinaryMask(m)) == (2.5, 2.5)

    def test_empty_raises(self):
        with pytest.raises(EmptyMaskError):
            centroid(empty_mask(4, 4))


class TestTranslateMask:
    def test_shift_within_frame_preserves_count(self):
        m = np.zeros((8, 8), dtype=np.uint8)
        m[2:4, 2:4] = 1
        moved, clipped = translate_mask(BinaryMask(m), 3, -1)
        assert clipped == 0
        assert moved.foreground_count == 4
        assert moved.data[5, 1] == 1 and moved.data[6, 2] == 1

    def test_clipping_counts_lost_pixels(self):
        m = np.zeros((4, 4), dtype=np.uint8)
        m[0:2, 0:2] = 1
        moved, clipped = translate_mask(BinaryMask(m), -1, 0)
        assert clipped == 2
        assert moved.foreground_count == 2

    def test_shift_entirely_out(self):
        moved, clipped = translate_mask(all_ones_mask(3, 3), 5, 0)
        assert moved.is_empty()
        assert clipped == 9

    @given(st.integers(-6, 6), st.integers(-6, 6), st.integers(0, 1000))
    @settings(max_examples=50)
    def test_count_conservation(self, dr, dc, seed):
        mask = BinaryMask(random_mask(rng(seed), 6, 6))
        moved, clipped = translate_mask(mask, dr, dc)
        assert moved.foreground_count + clipped == mask.foreground_count


def brute_majority_downsample(data: np.ndarray, factor: int) -> np.ndarray:
    h, w = data.shape
    out = np.zeros((h // factor, w // factor), dtype=np.uint8)
    for i in range(h // factor):
        for j in range(w // factor):
            block = data[i * factor : (i + 1) * factor, j * factor : (j + 1) * factor]
            ones = int(block.sum())
            out[i, j] = 1 if ones * 2 >= factor * factor else 0
    return out


class TestDownsampleMask:
    def test_factor_one_is_identity(self):
        m = BinaryMask(random_mask(rng(0), 8, 8))
        assert downsample_mask(m, 1) is m

    def test_tie_votes_foreground(self):
        m = np.array([[1, 0], [0, 1]], dtype=np.uint8)
        assert downsample_mask(BinaryMask(m), 2).data[0, 0] == 1

    def test_minority_votes_background(self):
        m = np.array([[1, 0], [0, 0]], dtype=np.uint8)
        assert downsample_mask(BinaryMask(m), 2).data[0, 0] == 0

    def test_non_dividing_factor_raises(self):
        with pytest.raises(BadFactorError):
            downsample_mask(empty_mask(6, 6), 4)
        with pytest.raises(BadFactorError):
            downsample_mask(empty_mask(6, 6), 0)

    @given(st.integers(0, 500), st.sampled_from([2, 3, 4, 6]))
    @settings(max_examples=60)
    def test_matches_block_vote_oracle(self, seed, factor):
        data = random_mask(rng(seed), 12, 12)
        got = downsample_mask(BinaryMask(data), factor)
        assert np.array_equal(got.data, brute_majority_downsample(data, factor))


class TestBboxCrop:
    def test_bbox_end_exclusive(self):
        m = np.zeros((6, 7), dtype=np.uint8)
        m[1:3, 2:6] = 1
        assert bbox(BinaryMask(m)) == (1, 2, 3, 6)

    def test_bbox_empty_raises(self):
        with pytest.raises(EmptyMaskError):
            bbox(empty_mask(3, 3))

    def test_crop_matches_bbox(self):
        img = RasterImage(rng(1).random((6, 7, 3)).astype(np.float32))
        m = np.zeros((6, 7), dtype=np.uint8)
        m[1:3, 2:6] = 1
        crop = crop_to_bbox(img, BinaryMask(m))
        assert crop.shape == (2, 4)
        assert np.array_equal(crop.data, img.data[1:3, 2:6, :])

    def test_crop_padding_clips_at_border(self):
        img = RasterImage(rng(2).random((5, 5, 1)).astype(np.float32))
        m = np.zeros((5, 5), dtype=np.uint8)
        m[0, 0] = 1
        crop = crop_to_bbox(img, BinaryMask(m), padding=2)
        assert crop.shape == (3, 3)


def brute_dilate(data: np.ndarray, radius: int) -> np.ndarray:
    h, w = data.shape
    fg = np.argwhere(data == 1)
    out = np.zeros_like(data)
    for r in range(h):
        for c in range(w):
            d2 = ((fg[:, 0] - r) ** 2 + (fg[:, 1] - c) ** 2).min()
            out[r, c] = 1 if d2 <= radius * radius else 0
    return out


class TestDilate:
    def test_zero_radius_is_identity(self):
        m = BinaryMask(random_mask(rng(3), 5, 5))
        assert dilate_mask(m, 0) is m

    def test_empty_unchanged(self):
        assert dilate_mask(empty_mask(4, 4), 3).is_empty()

    def test_disk_shape_from_point(self):
        m = np.zeros((9, 9), dtype=np.uint8)
        m[4, 4] = 1
        got = dilate_mask(BinaryMask(m), 2)
        assert got.data[4, 6] == 1 and got.data[4, 7] == 0
        assert got.data[2, 4] == 1
        assert got.data[2, 2] == 0  # sqrt(8) > 2

    @given(st.integers(0, 300), st.integers(1, 4))
    @settings(max_examples=40)
    def test_matches_pairwise_distance_oracle(self, seed, radius):
        data = random_mask(rng(seed), 8, 8, p=0.15)
        if not data.any():
            data[0, 0] = 1
        got = dilate_mask(BinaryMask(data), radius)
        assert np.array_equal(got.data, brute_dilate(data, radius))

    def test_inside_distance_zero_outside(self):
        m = np.zeros((5, 5), dtype=np.uint8)
        m[1:4, 1:4] = 1
        dist = inside_distance(BinaryMask(m))
        assert dist[0, 0] == 0.0
        assert dist[2, 2] == pytest.approx(2.0)


class TestQuantize:
    def test_snaps_to_grid(self):
        vals = np.array([0.0, 0.5, 1.0, 0.123456], dtype=np.float64)
        q = quantize_intensities(vals)
        assert np.array_equal(q * 255.0, np.round(q * 255.0))

    def test_round_half_up(self):
        assert quantize_intensities(np.array([0.5 / 255.0]))[0] == np.float32(1.0 / 255.0)

    @given(st.integers(0, 200))
    @settings(max_examples=30)
    def test_idempotent(self, seed):
        vals = rng(seed).random((4, 4, 3))
        q = quantize_intensities(vals)
        assert np.array_equal(q, quantize_intensities(q))


class TestResize:
    def test_identity_resize(self):
        arr = rng(4).random((5, 7))
        out = bilinear_resize_array(arr, 5, 7)
        assert np.allclose(out, arr)

    def test_double_then_constant_rows(self):
        arr = np.array([[0.0, 1.0]])
        out = bilinear_resize_array(arr, 1, 4)
        assert out[0, 0] == 0.0 and out[0, 3] == 1.0
        assert np.all(np.diff(out[0]) >= 0)

    def test_resize_image_bounds(self):
        img = RasterImage(rng(5).random((6, 6, 3)).astype(np.float32))
        out = resize_image(img, 13, 9)
        assert out.shape == (13, 9)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_mask_nearest_stays_binary(self):
        m = BinaryMask(random_mask(rng(6), 6, 6))
        out = resize_mask_nearest(m, 15, 10)
        assert out.shape == (15, 10)
        assert set(np.unique(out.data)) <= {0, 1}

    def test_mask_nearest_identity(self):
        m = BinaryMask(random_mask(rng(7), 8, 8))
        assert np.array_equal(resize_mask_nearest(m, 8, 8).data, m.data)


class TestFileRoundTrips:
    def test_quantized_image_roundtrip_is_lossless(self, tmp_path):
        img = RasterImage(quantize_intensities(rng(8).random((16, 16, 3))))
        save_image(img, tmp_path / "img.png")
        back = load_image(tmp_path / "img.png")
        assert np.array_equal(back.data, img.data)

    def test_grayscale_roundtrip(self, tmp_path):
        img = RasterImage(quantize_intensities(rng(9).random((8, 8, 1))))
        save_image(img, tmp_path / "gray.png")
        back = load_image(tmp_path / "gray.png")
        assert back.channels == 1
        assert np.array_equal(back.data, img.data)

    def test_mask_roundtrip(self, tmp_path):
        m = BinaryMask(random_mask(rng(10), 12, 12))
        save_mask(m, tmp_path / "m.png")
        assert np.array_equal(load_mask(tmp_path / "m.png").data, m.data)

    def test_mask_load_threshold(self, tmp_path):
        from PIL import Image

        arr = np.array([[0, 127], [128, 255]], dtype=np.uint8)
        Image.fromarray(arr, mode="L").save(tmp_path / "gray.png")
        m = load_mask(tmp_path / "gray.png")
        assert np.array_equal(m.data, np.array([[0, 0], [1, 1]], dtype=np.uint8))
