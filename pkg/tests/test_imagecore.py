"""Image containers and PGM round-trip behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from texwave import BoundsError, GrayImage, PgmParseError, crop, load_pgm, save_pgm


def make_pgm(width, height, maxval, payload):
    return b"P5 %d %d %d\n" % (width, height, maxval) + payload


class TestLoadPgm:
    def test_endpoints_map_to_unit_interval(self):
        img = load_pgm(make_pgm(2, 1, 255, bytes([0, 255])))
        assert img.width == 2 and img.height == 1
        np.testing.assert_array_equal(img.pixels, [0.0, 1.0])

    def test_linear_scale(self):
        img = load_pgm(make_pgm(1, 1, 255, bytes([128])))
        assert img.pixels[0] == pytest.approx(128 / 255)

    def test_sixteen_bit_big_endian(self):
        # sample 0x0100 = 256 with maxval 1000
        img = load_pgm(make_pgm(1, 1, 1000, bytes([0x01, 0x00])))
        assert img.pixels[0] == pytest.approx(256 / 1000)

    def test_rows_are_row_major(self):
        img = load_pgm(make_pgm(2, 2, 255, bytes([10, 20, 30, 40])))
        np.testing.assert_allclose(img.data * 255, [[10, 20], [30, 40]])

    def test_comments_and_extra_whitespace_accepted(self):
        raw = b"P5\n# a comment\n  2 1\n255\n" + bytes([7, 9])
        img = load_pgm(raw)
        assert img.width == 2 and img.height == 1

    def test_unsupported_magic_names_offset(self):
        with pytest.raises(PgmParseError, match="unsupported magic.*byte 0"):
            load_pgm(b"P2 1 1 255\n0")

    def test_truncated_payload_names_offset(self):
        raw = make_pgm(2, 2, 255, bytes([1, 2, 3]))
        with pytest.raises(PgmParseError, match="truncated"):
            load_pgm(raw)
        try:
            load_pgm(raw)
        except PgmParseError as e:
            assert e.offset == len(raw)

    def test_bad_maxval_rejected(self):
        with pytest.raises(PgmParseError, match="maxval"):
            load_pgm(make_pgm(1, 1, 70000, bytes([0, 0])))

    def test_garbage_header_token(self):
        with pytest.raises(PgmParseError, match="invalid width"):
            load_pgm(b"P5 x 1 255\n\x00")


class TestSavePgm:
    def test_endpoint_bytes(self):
        raw = save_pgm(GrayImage([[0.0, 1.0]]))
        assert raw == b"P5 2 1 255\n" + bytes([0, 255])

    def test_round_half_up(self):
        raw = save_pgm(GrayImage([[0.5]]))
        assert raw[-1] == 128

    def test_header_single_whitespace(self):
        raw = save_pgm(GrayImage([[0.25]]))
        assert raw.startswith(b"P5 1 1 255\n")

    def test_round_trip_quantization_bound(self):
        rng = np.random.default_rng(7)
        img = GrayImage(rng.random((16, 16)))
        back = load_pgm(save_pgm(img))
        assert np.max(np.abs(back.data - img.data)) <= 1 / 510 + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 12),
        st.integers(1, 12),
        st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, w, h, seed):
        rng = np.random.default_rng(seed)
        img = GrayImage(rng.random((h, w)))
        back = load_pgm(save_pgm(img))
        assert back.width == w and back.height == h
        assert np.max(np.abs(back.data - img.data)) <= 1 / 510 + 1e-12

    def test_save_is_deterministic(self):
        rng = np.random.default_rng(3)
        img = GrayImage(rng.random((8, 8)))
        assert save_pgm(img) == save_pgm(img)


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            GrayImage([[0.0, 1.5]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((0, 4)))

    def test_immutable(self):
        img = GrayImage([[0.5]])
        with pytest.raises((AttributeError, ValueError)):
            img.data[0, 0] = 0.0

    def test_pixels_row_major(self):
        img = GrayImage([[0.1, 0.2], [0.3, 0.4]])
        np.testing.assert_allclose(img.pixels, [0.1, 0.2, 0.3, 0.4])


class TestCrop:
    def test_identity(self):
        rng = np.random.default_rng(0)
        img = GrayImage(rng.random((5, 7)))
        out = crop(img, 0, 0, img.width, img.height)
        np.testing.assert_array_equal(out.data, img.data)

    def test_interior_of_ramp(self):
        ramp = GrayImage(np.arange(16).reshape(4, 4) / 15.0)
        out = crop(ramp, 1, 1, 2, 2)
        np.testing.assert_allclose(out.pixels * 15, [5, 6, 9, 10])

    def test_out_of_bounds(self):
        img = GrayImage(np.zeros((4, 4)))
        with pytest.raises(BoundsError):
            crop(img, 0, 0, img.width + 1, 1)

    def test_zero_size_rejected(self):
        img = GrayImage(np.zeros((4, 4)))
        with pytest.raises(BoundsError):
            crop(img, 0, 0, 0, 1)

    def test_no_resampling(self):
        rng = np.random.default_rng(1)
        img = GrayImage(rng.random((6, 6)))
        out = crop(img, 2, 3, 3, 2)
        np.testing.assert_array_equal(out.data, img.data[3:5, 2:5])
