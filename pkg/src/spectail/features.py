"""Fixed-length feature vectors combining radial-spectrum and block-DCT statistics.

The detector consumes a hand-specified 74-value feature vector per image plane:

====================  ===========================================================
indices               contents
====================  ===========================================================
0..63                 anchored radial log10-power, downsampled 128 -> 64 bins
64                    tail uplift delta
65                    radial frequency of the tail minimum (rho_min)
66                    fitted power-law exponent alpha
67                    RMS residual of the power-law fit
68..73                block-DCT band statistics (mean, variance) x (low, mid, high)
====================  ===========================================================

The layout is frozen: downstream model code addresses the tail-related slice
(indices 64..67) by position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .spectrum import (
    ANCHOR_RHO,
    LOG_POWER_FLOOR,
    fit_power_law,
    normalize_anchor,
    radial_log_power,
    tail_uplift,
)
from .transforms import blockwise_dct

RADIAL_BINS = 128
DOWNSAMPLED_BINS = 64

FEATURE_LENGTH = 74
RADIAL_SLICE = slice(0, 64)
DELTA_INDEX = 64
RHO_MIN_INDEX = 65
ALPHA_INDEX = 66
RESIDUAL_INDEX = 67
TAIL_SLICE = slice(64, 68)
DCT_SLICE = slice(68, 74)

FEATURE_NAMES = tuple(f"f{i}" for i in range(FEATURE_LENGTH))


def _zigzag_positions() -> tuple[tuple[int, int], ...]:
    """(row, col) positions of an 8x8 block in zigzag scan order."""
    out: list[tuple[int, int]] = []
    for s in range(15):
        rows = range(max(0, s - 7), min(7, s) + 1)
        if s % 2 == 0:
            rows = reversed(rows)  # even diagonals walk up-right
        out.extend((r, s - r) for r in rows)
    return tuple(out)


ZIGZAG = _zigzag_positions()
_ZZ_ROWS = np.array([p[0] for p in ZIGZAG])
_ZZ_COLS = np.array([p[1] for p in ZIGZAG])

# Band boundaries in zigzag positions, DC (position 0) excluded.
LOW_BAND = slice(1, 10)
MID_BAND = slice(10, 36)
HIGH_BAND = slice(36, 64)


@dataclass(frozen=True)
class DctStats:
    """Mean/variance of per-block log10 band energies over all 8x8 blocks.

    Bands partition the 63 AC coefficients by zigzag position: low 1-9,
    mid 10-35, high 36-63.  Energies are floored at 1e-12 before the log;
    variances are population variances.
    """

    low_mean: float
    low_var: float
    mid_mean: float
    mid_var: float
    high_mean: float
    high_var: float

    def __post_init__(self) -> None:
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise NumericError("DCT statistics must be finite")
        if self.low_var < 0 or self.mid_var < 0 or self.high_var < 0:
            raise NumericError("variances must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.low_mean,
                self.low_var,
                self.mid_mean,
                self.mid_var,
                self.high_mean,
                self.high_var,
            ]
        )


def dct_local_stats(plane: np.ndarray) -> DctStats:
    """Blockwise-DCT band-energy statistics of a plane.

    Each 8x8 block is transformed with the orthonormal DCT; the squared
    coefficients are summed within the three zigzag bands; the per-block
    energies go through log10 (floored at 1e-12) and are then pooled into a
    mean and a population variance per band.
    """
    coeffs = blockwise_dct(plane)
    nh, nw = coeffs.shape[0], coeffs.shape[1]
    flat = coeffs.reshape(nh * nw, 8, 8)
    zz = flat[:, _ZZ_ROWS, _ZZ_COLS] ** 2  # (n_blocks, 64) squared coeffs
    stats = []
    for band in (LOW_BAND, MID_BAND, HIGH_BAND):
        energy = zz[:, band].sum(axis=1)
        logs = np.log10(np.maximum(energy, LOG_POWER_FLOOR))
        stats.extend([float(logs.mean()), float(logs.var())])
    return DctStats(*stats)


def extract_features(plane: np.ndarray) -> np.ndarray:
    """Assemble the 74-value feature vector for a square power-of-two plane.

    Pipeline: 128-bin radial log-power spectrum, anchored at rho=0.7, pairwise
    mean-downsampled to 64 values; then tail uplift (delta, rho_min), the
    power-law fit over (0.05, 0.5) (alpha, residual RMS), and the six DCT band
    statistics, in the documented index order.

    The plane must be large enough (>= 256 on a side) that every one of the
    128 radial bins is populated; otherwise the fixed layout is impossible and
    a DomainError is raised.
    """
    spec = radial_log_power(plane, bins=RADIAL_BINS)
    if spec.rho.size != RADIAL_BINS:
        raise DomainError(
            f"only {spec.rho.size} of {RADIAL_BINS} radial bins populated; "
            "plane is too small for the fixed feature layout (need >= 256 px)"
        )
    anchored = normalize_anchor(spec, ANCHOR_RHO)
    radial = anchored.log_power.reshape(DOWNSAMPLED_BINS, 2).mean(axis=1)
    tail = tail_uplift(anchored)
    fit = fit_power_law(spec)
    stats = dct_local_stats(plane)
    vec = np.concatenate(
        [
            radial,
            [tail.delta, tail.rho_min, fit.alpha, fit.residual_rms],
            stats.as_array(),
        ]
    )
    if not np.all(np.isfinite(vec)):
        raise NumericError("non-finite feature value")
    return vec
