"""Image loading and plane preparation: decode, color conversion, cropping.

Decoded images are float arrays; no resampling ever happens here. Images
smaller than the requested analysis size are rejected rather than upscaled,
because upsampling would manufacture exactly the spectral structure the rest
of the toolkit measures.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, SizeError

DEFAULT_ANALYSIS_SIZE = 256


class YCbCrPlanes(NamedTuple):
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray


def decode(source, name: str | None = None) -> np.ndarray:
    """Decode an image file to an (H, W, 3) float64 RGB array in [0, 255].

    ``source`` is a path or a binary file object; ``name`` overrides the label
    used in error messages (useful when decoding from a buffer). Grayscale and
    palette images are expanded to RGB. Raises DecodeError on unreadable or
    unsupported files.
    """
    label = name if name is not None else source
    try:
        with Image.open(source) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"cannot decode {label!r}: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DecodeError(f"cannot decode {label!r}: unexpected shape {arr.shape}")
    return arr


def to_ycbcr(rgb: np.ndarray) -> YCbCrPlanes:
    """Full-range BT.601 conversion; planes stay real-valued (no clamping).

    Y = 0.299 R + 0.587 G + 0.114 B
    Cb = 128 - 0.168736 R - 0.331264 G + 0.5 B
    Cr = 128 + 0.5 R - 0.418688 G - 0.081312 B
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise SizeError(f"expected an (H, W, 3) array, got shape {rgb.shape}")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return YCbCrPlanes(y=y, cb=cb, cr=cr)


def center_crop_pow2(plane: np.ndarray, target: int = DEFAULT_ANALYSIS_SIZE) -> np.ndarray:
    """Centered crop of a 2D plane to a square power-of-two target.

    For an odd margin the extra row/column is dropped from the bottom/right.
    Planes smaller than the target are rejected (no upsampling).
    """
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise SizeError(f"expected a 2D plane, got shape {plane.shape}")
    if target < 8 or (target & (target - 1)) != 0:
        raise SizeError(f"target must be a power of two >= 8, got {target}")
    h, w = plane.shape
    if h < target or w < target:
        raise SizeError(f"plane {h}x{w} is smaller than the {target}x{target} target")
    top = (h - target) // 2
    left = (w - target) // 2
    return plane[top : top + target, left : left + target]
