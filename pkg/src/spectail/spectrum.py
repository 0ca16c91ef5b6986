"""Radially averaged log-power spectra and tail statistics.

Frequencies are expressed as a normalized radius rho: the distance from DC in
units of the axis Nyquist frequency, so the axis Nyquist maps to rho = 1.
Corner frequencies (rho > 1) are discarded, which keeps every annulus in
(0, 1] fully populated on square grids and matches plots that end at the
Nyquist edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, FitError
from .transforms import fft2d

LOG_POWER_FLOOR = 1e-12
DEFAULT_BINS = 128
DEFAULT_FIT_BAND = (0.05, 0.5)
TAIL_BAND = (0.7, 1.0)
ANCHOR_RHO = 0.7


@dataclass(frozen=True)
class RadialSpectrum:
    """Azimuthally averaged log10 power per annulus of normalized frequency.

    rho holds bin centers in (0, 1]; log_power the base-10 log of the mean
    power in each annulus (floored at LOG_POWER_FLOOR before the log); counts
    the number of frequency samples that fell in the annulus. Only populated
    annuli (count > 0) are reported.
    """

    rho: np.ndarray
    log_power: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.rho) == len(self.log_power) == len(self.counts)):
            raise DimensionError("rho, log_power, counts must have equal length")


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of log10 power against log10 rho over a band."""

    alpha: float           # negated slope: power ~ rho^(-alpha)
    intercept: float
    residual_rms: float
    rho_lo: float
    rho_hi: float
    n_bins: int


@dataclass(frozen=True)
class TailUplift:
    """Rise of the smoothed log-power tail from its minimum to the Nyquist edge."""

    delta: float           # smoothed log10 power at the last bin minus the band minimum
    rho_min: float         # bin center where the smoothed tail attains its minimum


def radial_log_power(plane: np.ndarray, bins: int = DEFAULT_BINS) -> RadialSpectrum:
    """Azimuthal average of the 2D power spectrum over annuli of rho.

    The plane mean is removed first, so the DC bin never leaks into the
    profile. Requires a square power-of-two plane and bins >= 16.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.shape[0] != plane.shape[1]:
        raise DimensionError(f"plane must be square, got shape {plane.shape}")
    if bins < 16:
        raise DomainError(f"bins must be >= 16, got {bins}")
    n = plane.shape[0]
    field = fft2d(plane - plane.mean())
    power = np.abs(field) ** 2

    freqs = np.fft.fftfreq(n, d=1.0 / n)  # integer frequencies as floats
    nyq = n / 2.0
    rho2 = (freqs[:, None] ** 2 + freqs[None, :] ** 2) / nyq**2
    mask = (rho2 > 0.0) & (rho2 <= 1.0)
    rho = np.sqrt(rho2[mask])
    # Bin i covers rho in (i/bins, (i+1)/bins]: right-closed, so integer
    # radius i+1 always lands in bin i and every bin of a plane with
    # n/2 >= bins is populated.  rho = 1 falls in the last bin naturally.
    idx = np.ceil(rho * bins).astype(np.intp) - 1
    np.clip(idx, 0, bins - 1, out=idx)

    counts = np.bincount(idx, minlength=bins)
    sums = np.bincount(idx, weights=power[mask], minlength=bins)
    populated = counts > 0
    mean_power = sums[populated] / counts[populated]
    centers = (np.arange(bins, dtype=np.float64) + 0.5) / bins

    return RadialSpectrum(
        rho=centers[populated],
        log_power=np.log10(np.maximum(mean_power, LOG_POWER_FLOOR)),
        counts=counts[populated].astype(np.int64),
    )


def fit_power_law(
    spec: RadialSpectrum,
    rho_lo: float = DEFAULT_FIT_BAND[0],
    rho_hi: float = DEFAULT_FIT_BAND[1],
) -> PowerLawFit:
    """OLS fit of log_power vs log10(rho) over [rho_lo, rho_hi].

    alpha is the negated slope, so a field with power ~ rho^(-a) fits
    alpha ~ a. Raises FitError when fewer than 8 bins fall in the band.
    """
    if not (0.0 < rho_lo < rho_hi <= 1.0):
        raise DomainError(f"invalid fit band [{rho_lo}, {rho_hi}]")
    in_band = (spec.rho >= rho_lo) & (spec.rho <= rho_hi)
    if int(in_band.sum()) < 8:
        raise FitError(
            f"only {int(in_band.sum())} bins in [{rho_lo}, {rho_hi}]; need at least 8"
        )
    x = np.log10(spec.rho[in_band])
    y = spec.log_power[in_band]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return PowerLawFit(
        alpha=float(-slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        rho_lo=float(rho_lo),
        rho_hi=float(rho_hi),
        n_bins=int(in_band.sum()),
    )


def normalize_anchor(spec: RadialSpectrum, rho0: float = ANCHOR_RHO) -> RadialSpectrum:
    """Shift log_power so its linear interpolation at rho0 is exactly 0.

    The anchor must lie inside the reported rho range. Anchoring twice is a
    no-op, and it commutes with any constant log-power offset.
    """
    if not spec.rho.size or rho0 < spec.rho[0] or rho0 > spec.rho[-1]:
        raise DomainError(f"anchor rho {rho0} outside covered range")
    level = float(np.interp(rho0, spec.rho, spec.log_power))
    return RadialSpectrum(
        rho=spec.rho, log_power=spec.log_power - level, counts=spec.counts
    )


def _smooth3(values: np.ndarray) -> np.ndarray:
    """Centered 3-bin moving average; windows shrink at the band edges."""
    out = np.empty_like(values)
    n = len(values)
    for i in range(n):
        lo = max(0, i - 1)
        hi = min(n, i + 2)
        out[i] = values[lo:hi].mean()
    return out


def tail_uplift(spec: RadialSpectrum) -> TailUplift:
    """Measure the high-frequency rise of a spectrum over rho in [0.7, 1].

    The band's log_power is smoothed with a centered 3-bin moving average;
    delta is the smoothed value at the last bin minus the smoothed band
    minimum (>= 0 by construction), and rho_min is where that minimum sits.
    Requires coverage up to rho >= 0.99.
    """
    if not spec.rho.size or spec.rho[-1] < 0.99:
        raise DomainError("spectrum does not cover the tail band up to rho >= 0.99")
    in_band = (spec.rho >= TAIL_BAND[0]) & (spec.rho <= TAIL_BAND[1])
    if int(in_band.sum()) < 3:
        raise DomainError("fewer than 3 bins in the tail band [0.7, 1.0]")
    rho = spec.rho[in_band]
    smoothed = _smooth3(spec.log_power[in_band])
    k = int(np.argmin(smoothed))
    return TailUplift(delta=float(smoothed[-1] - smoothed[k]), rho_min=float(rho[k]))
