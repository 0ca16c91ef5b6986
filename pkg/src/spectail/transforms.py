"""Frequency transforms: 2D FFT on power-of-two grids, orthonormal 8x8 DCT,
and a quantization-only JPEG roundtrip.

The FFT is the unnormalized forward transform (DC of a constant c plane is
c * W * H); the inverse carries the 1/(W*H) factor, so Parseval holds as

    sum |x|^2 = (1/(W*H)) * sum |X|^2

The 8x8 DCT is the orthonormal (type-II) variant, so blockwise energy is
preserved exactly and the inverse is the transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

_MIN_FFT_SIZE = 8


def _require_pow2_2d(a: np.ndarray, what: str = "plane") -> None:
    if a.ndim != 2:
        raise DimensionError(f"{what} must be 2D, got shape {a.shape}")
    h, w = a.shape
    for n in (h, w):
        if n < _MIN_FFT_SIZE or (n & (n - 1)) != 0:
            raise DimensionError(
                f"{what} dimensions must be powers of two >= {_MIN_FFT_SIZE}, got {h}x{w}"
            )


def fft2d(plane: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT of a power-of-two plane.

    Returns a complex array in standard FFT layout (DC at [0, 0], axis
    frequencies following numpy's fftfreq ordering).
    """
    _require_pow2_2d(plane)
    return np.fft.fft2(np.asarray(plane, dtype=np.float64))


def ifft2d(field: np.ndarray) -> np.ndarray:
    """Inverse of fft2d (carries the 1/(W*H) normalization)."""
    _require_pow2_2d(field, what="field")
    return np.fft.ifft2(np.asarray(field, dtype=np.complex128))


# --- orthonormal 8x8 DCT ---------------------------------------------------

def _dct_basis(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * x + 1) * k / (2 * n))
    mat[0, :] *= np.sqrt(1.0 / n)
    mat[1:, :] *= np.sqrt(2.0 / n)
    return mat


_DCT8 = _dct_basis(8)


def _require_block_multiple(plane: np.ndarray) -> None:
    if plane.ndim != 2:
        raise DimensionError(f"plane must be 2D, got shape {plane.shape}")
    if plane.shape[0] % 8 or plane.shape[1] % 8:
        raise DimensionError(f"plane dimensions must be multiples of 8, got {plane.shape}")


def dct8x8(block: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II of a single 8x8 block."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (8, 8):
        raise DimensionError(f"expected an 8x8 block, got {block.shape}")
    return _DCT8 @ block @ _DCT8.T


def idct8x8(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of dct8x8 (transpose of the orthonormal basis)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (8, 8):
        raise DimensionError(f"expected an 8x8 block, got {coeffs.shape}")
    return _DCT8.T @ coeffs @ _DCT8


def blockwise_dct(plane: np.ndarray) -> np.ndarray:
    """Orthonormal 8x8 DCT applied to every block of a plane.

    Returns an array of shape (H//8, W//8, 8, 8) of per-block coefficients.
    """
    plane = np.asarray(plane, dtype=np.float64)
    _require_block_multiple(plane)
    nh, nw = plane.shape[0] // 8, plane.shape[1] // 8
    blocks = plane.reshape(nh, 8, nw, 8).transpose(0, 2, 1, 3)
    return np.einsum("ij,bcjk,lk->bcil", _DCT8, blocks, _DCT8, optimize=True)


def blockwise_idct(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of blockwise_dct, back to a (H, W) plane."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    nh, nw = coeffs.shape[0], coeffs.shape[1]
    blocks = np.einsum("ji,bcjk,kl->bcil", _DCT8, coeffs, _DCT8, optimize=True)
    return blocks.transpose(0, 2, 1, 3).reshape(nh * 8, nw * 8)


# --- quantization-only JPEG model -------------------------------------------

# Standard luminance base quantization table.
BASE_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class QuantTable:
    """8x8 quantization step table derived from a quality factor in [1, 100]."""

    quality: int
    steps: np.ndarray

    @classmethod
    def from_quality(cls, quality: int) -> "QuantTable":
        if not isinstance(quality, (int, np.integer)):
            raise DomainError(f"quality must be an integer, got {quality!r}")
        if quality < 1 or quality > 100:
            raise DomainError(f"quality must be in [1, 100], got {quality}")
        scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
        steps = np.floor((BASE_LUMA_TABLE * scale + 50.0) / 100.0)
        steps = np.clip(steps, 1.0, 255.0)
        return cls(quality=int(quality), steps=steps)


def jpeg_degrade(plane: np.ndarray, quality: int) -> np.ndarray:
    """Quantization-only JPEG roundtrip of an intensity plane in [0, 255].

    Per 8x8 block: level shift, orthonormal DCT, divide by the quality-scaled
    step table, round, multiply back, inverse DCT, then clamp to [0, 255].
    There is no chroma subsampling and no entropy coding; the plane keeps its
    real-valued grid.
    """
    plane = np.asarray(plane, dtype=np.float64)
    _require_block_multiple(plane)
    if plane.size and (plane.min() < 0.0 or plane.max() > 255.0):
        raise DomainError("pixel values must lie in [0, 255]")
    steps = QuantTable.from_quality(quality).steps
    coeffs = blockwise_dct(plane - 128.0)
    quantized = np.round(coeffs / steps) * steps
    out = blockwise_idct(quantized) + 128.0
    return np.clip(out, 0.0, 255.0)
