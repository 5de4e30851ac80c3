"""Grayscale, bilinear resampling, cropping, rotation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seatnet.errors import DataError, ShapeError
from seatnet.imgops import (
    crop,
    replicate_gray,
    rescale_short_side,
    resize_bilinear,
    rotate90,
    to_grayscale,
)
from seatnet.rng import Rng


class TestGrayscale:
    def test_white_stays_one(self):
        img = np.ones((3, 2, 2), np.float32)
        assert np.allclose(to_grayscale(img), 1.0)

    def test_pure_red(self):
        img = np.zeros((3, 1, 1), np.float32)
        img[0] = 1.0
        assert abs(to_grayscale(img)[0, 0, 0] - 0.299) < 1e-6

    def test_pure_green(self):
        img = np.zeros((3, 1, 1), np.float32)
        img[1] = 1.0
        assert abs(to_grayscale(img)[0, 0, 0] - 0.587) < 1e-6

    def test_wrong_channels(self):
        with pytest.raises(ShapeError):
            to_grayscale(np.zeros((1, 2, 2), np.float32))

    @given(st.floats(0, 1, width=32))
    @settings(max_examples=30, deadline=None)
    def test_achromatic_idempotent(self, v):
        img = np.full((3, 2, 2), v, np.float32)
        assert np.allclose(to_grayscale(img)[0], img[0], atol=1e-6)


class TestBilinear:
    def test_row_upscale_worked_example(self):
        img = np.array([[[0.0, 1.0]]], np.float32)  # (1, 1, 2)
        out = resize_bilinear(img, 1, 4)
        assert np.allclose(out[0, 0], [0.0, 0.25, 0.75, 1.0], atol=1e-6)

    def test_same_size_identity(self, rand):
        img = rand.rand(1, 5, 7).astype(np.float32)
        assert resize_bilinear(img, 5, 7) is img

    def test_rescale_target_is_short_side(self, rand):
        img = rand.rand(1, 100, 200).astype(np.float32)
        out = rescale_short_side(img, 256)
        assert out.shape == (1, 256, 512)
        tall = rescale_short_side(rand.rand(1, 200, 100).astype(np.float32), 256)
        assert tall.shape == (1, 512, 256)

    def test_rescale_identity_when_already_target(self, rand):
        img = rand.rand(1, 64, 80).astype(np.float32)
        assert rescale_short_side(img, 64) is img

    def test_constant_image_stays_constant(self):
        img = np.full((1, 10, 20), 0.37, np.float32)
        down = rescale_short_side(img, 5)
        up = rescale_short_side(down, 10)
        assert np.allclose(down, 0.37, atol=1e-6)
        assert np.allclose(up, 0.37, atol=1e-6)


class TestCrop:
    def test_center_offsets(self):
        img = np.zeros((1, 256, 256), np.float32)
        img[0, 16, 16] = 1.0
        out = crop(img, 224, mode="center")
        assert out.shape == (1, 224, 224)
        assert out[0, 0, 0] == 1.0  # offsets (16, 16)

    def test_exact_size_identity_both_modes(self, rand):
        img = rand.rand(1, 224, 224).astype(np.float32)
        assert np.array_equal(crop(img, 224, mode="center"), img)
        assert np.array_equal(crop(img, 224, mode="random", rng=Rng(0)), img)

    def test_random_deterministic_per_seed(self, rand):
        img = rand.rand(1, 50, 60).astype(np.float32)
        a = crop(img, 32, mode="random", rng=Rng(9))
        b = crop(img, 32, mode="random", rng=Rng(9))
        assert np.array_equal(a, b)

    def test_random_covers_valid_offsets_only(self, rand):
        img = rand.rand(1, 34, 33).astype(np.float32)
        for seed in range(20):
            out = crop(img, 32, mode="random", rng=Rng(seed))
            assert out.shape == (1, 32, 32)

    def test_too_small_errors(self):
        with pytest.raises(DataError):
            crop(np.zeros((1, 10, 10), np.float32), 32, mode="center")


class TestRotate:
    def test_quarter_turn_permutes_pixels(self):
        img = np.arange(6, dtype=np.float32).reshape(1, 2, 3)
        out = rotate90(img, 1)
        assert out.shape == (1, 3, 2)
        assert np.array_equal(out[0], np.rot90(img[0]))

    def test_four_turns_identity(self, rand):
        img = rand.rand(1, 4, 4).astype(np.float32)
        assert np.array_equal(rotate90(img, 4), img)


class TestReplicate:
    def test_gray_to_three_channels(self, rand):
        img = rand.rand(1, 3, 3).astype(np.float32)
        out = replicate_gray(img)
        assert out.shape == (3, 3, 3)
        assert np.array_equal(out[0], out[2])

    def test_three_channel_passthrough(self, rand):
        img = rand.rand(3, 2, 2).astype(np.float32)
        assert replicate_gray(img) is img
