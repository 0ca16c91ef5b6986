"""Tests for image decoding, color conversion, and center cropping."""

from __future__ import annotations

import io

import numpy as np
import pytest
from PIL import Image

from spectail.errors import DecodeError, SizeError
from spectail.ingest import (
    DEFAULT_ANALYSIS_SIZE,
    center_crop_pow2,
    decode,
    to_ycbcr,
)


def _png_bytes(arr, mode):
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------

def test_decode_white_pixel(tmp_path):
    path = tmp_path / "white.png"
    path.write_bytes(_png_bytes(np.full((1, 1, 3), 255, dtype=np.uint8), "RGB"))
    arr = decode(str(path))
    assert arr.shape == (1, 1, 3)
    assert arr.dtype == np.float64
    assert np.array_equal(arr[0, 0], [255.0, 255.0, 255.0])


def test_decode_grayscale_expands_to_rgb(tmp_path):
    path = tmp_path / "gray.png"
    path.write_bytes(_png_bytes(np.full((4, 4), 7, dtype=np.uint8), "L"))
    arr = decode(str(path))
    assert arr.shape == (4, 4, 3)
    for c in range(3):
        assert np.all(arr[:, :, c] == 7.0)


def test_decode_roundtrips_rgb_values(tmp_path):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(8, 12, 3), dtype=np.uint8)
    path = tmp_path / "rand.png"
    path.write_bytes(_png_bytes(pixels, "RGB"))
    arr = decode(str(path))
    assert np.array_equal(arr, pixels.astype(np.float64))


def test_decode_accepts_file_object_with_name_label():
    data = _png_bytes(np.zeros((2, 2, 3), dtype=np.uint8), "RGB")
    arr = decode(io.BytesIO(data), name="buffer.png")
    assert arr.shape == (2, 2, 3)


def test_decode_truncated_file_raises(tmp_path):
    good = _png_bytes(np.zeros((16, 16, 3), dtype=np.uint8), "RGB")
    path = tmp_path / "broken.png"
    path.write_bytes(good[: len(good) // 2])
    with pytest.raises(DecodeError):
        decode(str(path))


def test_decode_non_image_raises(tmp_path):
    path = tmp_path / "notes.txt"
    path.write_text("this is not an image")
    with pytest.raises(DecodeError):
        decode(str(path))


def test_decode_missing_file_raises(tmp_path):
    with pytest.raises(DecodeError):
        decode(str(tmp_path / "absent.png"))


# ---------------------------------------------------------------------------
# to_ycbcr
# ---------------------------------------------------------------------------

def test_ycbcr_white():
    rgb = np.full((1, 1, 3), 255.0)
    planes = to_ycbcr(rgb)
    assert planes.y[0, 0] == pytest.approx(255.0, abs=1e-9)
    assert planes.cb[0, 0] == pytest.approx(128.0, abs=1e-9)
    assert planes.cr[0, 0] == pytest.approx(128.0, abs=1e-9)


def test_ycbcr_black():
    planes = to_ycbcr(np.zeros((1, 1, 3)))
    assert planes.y[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert planes.cb[0, 0] == pytest.approx(128.0, abs=1e-12)
    assert planes.cr[0, 0] == pytest.approx(128.0, abs=1e-12)


def test_ycbcr_pure_red_luma():
    rgb = np.zeros((1, 1, 3))
    rgb[0, 0, 0] = 255.0
    planes = to_ycbcr(rgb)
    assert planes.y[0, 0] == pytest.approx(0.299 * 255.0, abs=1e-9)  # 76.245


def test_ycbcr_pure_blue_cb_unclamped():
    rgb = np.zeros((1, 1, 3))
    rgb[0, 0, 2] = 255.0
    planes = to_ycbcr(rgb)
    # Full-range coefficients push Cb past 255; the plane stays real-valued.
    assert planes.cb[0, 0] == pytest.approx(255.5, abs=1e-9)


def test_ycbcr_gray_luma_equals_value():
    # For R=G=B the luma weights sum to exactly 1.
    rgb = np.full((3, 5, 3), 123.0)
    planes = to_ycbcr(rgb)
    assert np.max(np.abs(planes.y - 123.0)) < 1e-9
    assert np.max(np.abs(planes.cb - 128.0)) < 1e-9
    assert np.max(np.abs(planes.cr - 128.0)) < 1e-9


def test_ycbcr_matrix_roundtrip():
    # Invert the conversion numerically and recover the RGB input.
    rng = np.random.default_rng(42)
    rgb = rng.uniform(0.0, 255.0, size=(6, 4, 3))
    planes = to_ycbcr(rgb)
    mat = np.array(
        [
            [0.299, 0.587, 0.114],
            [-0.168736, -0.331264, 0.5],
            [0.5, -0.418688, -0.081312],
        ]
    )
    inv = np.linalg.inv(mat)
    stacked = np.stack(
        [planes.y, planes.cb - 128.0, planes.cr - 128.0], axis=-1
    )
    recovered = stacked @ inv.T
    assert np.max(np.abs(recovered - rgb)) < 1e-9


def test_ycbcr_rejects_bad_shape():
    with pytest.raises(SizeError):
        to_ycbcr(np.zeros((4, 4)))
    with pytest.raises(SizeError):
        to_ycbcr(np.zeros((4, 4, 4)))


# ---------------------------------------------------------------------------
# center_crop_pow2
# ---------------------------------------------------------------------------

def test_crop_default_target_is_256():
    assert DEFAULT_ANALYSIS_SIZE == 256
    plane = np.arange(300 * 300, dtype=np.float64).reshape(300, 300)
    out = center_crop_pow2(plane)
    assert out.shape == (256, 256)
    # margin (300-256)//2 = 22: rows/cols 22..277 survive
    assert np.array_equal(out, plane[22:278, 22:278])


def test_crop_odd_margin_drops_bottom_right():
    plane = np.arange(257 * 256, dtype=np.float64).reshape(257, 256)
    out = center_crop_pow2(plane, target=256)
    # (257-256)//2 = 0: top row kept, bottom row dropped
    assert np.array_equal(out, plane[0:256, :])


def test_crop_exact_size_is_identity():
    rng = np.random.default_rng(1)
    plane = rng.normal(size=(64, 64))
    out = center_crop_pow2(plane, target=64)
    assert np.array_equal(out, plane)


def test_crop_idempotent():
    rng = np.random.default_rng(2)
    plane = rng.normal(size=(100, 90))
    once = center_crop_pow2(plane, target=64)
    twice = center_crop_pow2(once, target=64)
    assert np.array_equal(once, twice)


def test_crop_rejects_small_planes():
    with pytest.raises(SizeError):
        center_crop_pow2(np.zeros((255, 300)), target=256)
    with pytest.raises(SizeError):
        center_crop_pow2(np.zeros((300, 100)), target=256)


def test_crop_rejects_bad_targets():
    plane = np.zeros((64, 64))
    for target in (0, 4, 100, -8):
        with pytest.raises(SizeError):
            center_crop_pow2(plane, target=target)


def test_crop_rejects_non_2d():
    with pytest.raises(SizeError):
        center_crop_pow2(np.zeros((64, 64, 3)), target=64)


# ---------------------------------------------------------------------------
# pipeline: decode -> luma -> crop
# ---------------------------------------------------------------------------

def test_gray_png_luma_plane_matches_pixels(tmp_path):
    rng = np.random.default_rng(3)
    pixels = rng.integers(0, 256, size=(300, 320), dtype=np.uint8)
    path = tmp_path / "gray300.png"
    path.write_bytes(_png_bytes(pixels, "L"))
    y = to_ycbcr(decode(str(path))).y
    plane = center_crop_pow2(y, target=256)
    expected = pixels[22:278, 32:288].astype(np.float64)
    assert np.max(np.abs(plane - expected)) < 1e-9
