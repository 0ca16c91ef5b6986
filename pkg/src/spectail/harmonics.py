"""Harmonic generation by pointwise nonlinearities, in two settings.

1D lab: band-limited signals as explicit Fourier coefficient vectors, with a
polynomial activation applied either exactly (repeated coefficient
convolution) or through a sampled time grid. A filter -> activation chain
then reproduces the closed-form top-harmonic power of depth-L cascades.

2D surrogate: a single-channel convolutional cascade with a pointwise
activation, used to generate planes whose spectral tails can be compared by
the spectrum module, plus seeded power-law (pink) noise fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, PreconditionError

LEAKY_SLOPE = 0.01
ACTIVATION_KINDS = ("identity", "relu", "leaky_relu", "silu", "polynomial")


# --- 1D band-limited signals -------------------------------------------------

@dataclass(frozen=True)
class FourierSignal:
    """A band-limited signal as coefficients c[m] for m in [-M, M].

    coeffs[i] holds the coefficient of exp(i * m * t) with m = i - bandwidth,
    so index 0 is -M, index bandwidth is DC, and index 2M is +M.
    """

    bandwidth: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.bandwidth < 0:
            raise DomainError(f"bandwidth must be >= 0, got {self.bandwidth}")
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or len(c) != 2 * self.bandwidth + 1:
            raise DimensionError(
                f"need {2 * self.bandwidth + 1} coefficients for bandwidth "
                f"{self.bandwidth}, got {len(c)}"
            )
        object.__setattr__(self, "coeffs", c)

    def coeff(self, m: int) -> complex:
        """Coefficient at signed frequency m (0 outside the band)."""
        if abs(m) > self.bandwidth:
            return 0.0 + 0.0j
        return complex(self.coeffs[m + self.bandwidth])

    def hermitian_defect(self) -> float:
        """Max |c[-m] - conj(c[m])|; 0 for signals that are real in time."""
        flipped = np.conj(self.coeffs[::-1])
        return float(np.max(np.abs(self.coeffs - flipped)))

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Evaluate sum_m c[m] exp(i m t) on a grid of times."""
        t = np.asarray(t, dtype=np.float64)
        m = np.arange(-self.bandwidth, self.bandwidth + 1)
        return np.exp(1j * np.outer(t, m)) @ self.coeffs


def random_real_signal(bandwidth: int, seed: int, min_top: float = 0.3) -> FourierSignal:
    """Seeded random signal with Hermitian symmetry and |c[M]| >= min_top.

    The top coefficient's magnitude is drawn from [min_top, min_top + 1] so
    relative-error checks against formulas with c[M]^d denominators stay
    well-conditioned.
    """
    if bandwidth < 1:
        raise DomainError(f"bandwidth must be >= 1, got {bandwidth}")
    rng = np.random.default_rng(seed)
    coeffs = np.zeros(2 * bandwidth + 1, dtype=np.complex128)
    coeffs[bandwidth] = rng.normal()
    for m in range(1, bandwidth + 1):
        if m == bandwidth:
            mag = min_top + rng.uniform()
        else:
            mag = abs(rng.normal(scale=0.7)) + 0.05
        phase = rng.uniform(0.0, 2.0 * np.pi)
        c = mag * np.exp(1j * phase)
        coeffs[bandwidth + m] = c
        coeffs[bandwidth - m] = np.conj(c)
    return FourierSignal(bandwidth=bandwidth, coeffs=coeffs)


@dataclass(frozen=True)
class PolyActivation:
    """Pointwise polynomial phi(z) = sum_q a[q] z^q, a[degree] != 0."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.coeffs, dtype=np.complex128)
        if a.ndim != 1 or len(a) == 0:
            raise ConfigError("polynomial needs a non-empty 1D coefficient array")
        if len(a) > 1 and a[-1] == 0:
            raise ConfigError("leading polynomial coefficient must be nonzero")
        object.__setattr__(self, "coeffs", a)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.polyval(self.coeffs[::-1], z)


def poly_apply_coeffs(sig: FourierSignal, act: PolyActivation) -> FourierSignal:
    """Apply a polynomial activation exactly in the coefficient domain.

    z^q contributes the q-fold convolution of the coefficient vector, so the
    output bandwidth is degree * bandwidth; the constant term lands on DC
    only.
    """
    d = act.degree
    out_bw = d * sig.bandwidth
    out = np.zeros(2 * out_bw + 1, dtype=np.complex128)
    out[out_bw] += act.coeffs[0]
    power = sig.coeffs.copy()
    for q in range(1, d + 1):
        if act.coeffs[q] != 0:
            k = q * sig.bandwidth
            out[out_bw - k : out_bw + k + 1] += act.coeffs[q] * power
        if q < d:
            power = np.convolve(power, sig.coeffs)
    return FourierSignal(bandwidth=out_bw, coeffs=out)


def poly_apply_time(
    sig: FourierSignal, act: PolyActivation, samples: int | None = None
) -> FourierSignal:
    """Apply a polynomial activation through a uniform time grid.

    Synthesizes the signal on `samples` points over one period, applies the
    polynomial pointwise, and recovers coefficients by DFT. Alias-free as
    long as samples >= 2 * degree * bandwidth + 1 (the default).
    """
    out_bw = act.degree * sig.bandwidth
    if samples is None:
        samples = 2 * out_bw + 1
    if samples < 2 * out_bw + 1:
        raise PreconditionError(
            f"{samples} samples alias a bandwidth-{out_bw} output; need >= {2 * out_bw + 1}"
        )
    placed = np.zeros(samples, dtype=np.complex128)
    for m in range(-sig.bandwidth, sig.bandwidth + 1):
        placed[m % samples] = sig.coeff(m)
    x = np.fft.ifft(placed) * samples
    y = act(x)
    spec = np.fft.fft(y) / samples
    coeffs = np.empty(2 * out_bw + 1, dtype=np.complex128)
    for m in range(-out_bw, out_bw + 1):
        coeffs[m + out_bw] = spec[m % samples]
    return FourierSignal(bandwidth=out_bw, coeffs=coeffs)


@dataclass(frozen=True)
class Theorem1Report:
    """Top-harmonic check: output coefficient at degree*M vs a_d * c[M]^d."""

    input_bandwidth: int
    degree: int
    predicted: complex
    measured: complex
    rel_diff: float


def check_theorem1(sig: FourierSignal, act: PolyActivation) -> Theorem1Report:
    """Verify that the top output harmonic is a_d * c[M]^d at frequency d*M.

    Requires degree >= 2 and a nonzero top input coefficient; the output
    coefficient beyond d*M is structurally zero (the output array simply does
    not extend past it), so the interesting claim is the top value itself.
    """
    if act.degree < 2:
        raise PreconditionError(f"activation degree must be >= 2, got {act.degree}")
    if sig.bandwidth < 1:
        raise PreconditionError("input signal must have bandwidth >= 1")
    top_in = sig.coeff(sig.bandwidth)
    if top_in == 0:
        raise PreconditionError("top input coefficient is zero")
    out = poly_apply_coeffs(sig, act)
    predicted = complex(act.coeffs[-1]) * top_in**act.degree
    measured = out.coeff(out.bandwidth)
    rel = abs(measured - predicted) / abs(predicted)
    return Theorem1Report(
        input_bandwidth=sig.bandwidth,
        degree=act.degree,
        predicted=predicted,
        measured=measured,
        rel_diff=float(rel),
    )


# --- filter -> activation cascades (1D) --------------------------------------

@dataclass(frozen=True)
class ToneInput:
    """A single real tone A*cos(k0 t): coefficients A/2 at +-k0."""

    k0: int
    amplitude: float

    def __post_init__(self) -> None:
        if self.k0 < 1:
            raise DomainError(f"tone frequency must be >= 1, got {self.k0}")
        if not self.amplitude > 0:
            raise DomainError(f"tone amplitude must be > 0, got {self.amplitude}")

    def to_signal(self) -> FourierSignal:
        coeffs = np.zeros(2 * self.k0 + 1, dtype=np.complex128)
        coeffs[0] = coeffs[-1] = self.amplitude / 2.0
        return FourierSignal(bandwidth=self.k0, coeffs=coeffs)


def _filter_gain(table: Mapping[int, complex], k: int, layer: int) -> complex:
    """Gain at signed frequency k; negative k uses the conjugate of H(|k|)."""
    key = abs(k)
    if key not in table:
        raise ConfigError(f"layer {layer} filter has no gain tabulated for |k| = {key}")
    gain = complex(table[key])
    return gain if k >= 0 else np.conj(gain)


@dataclass(frozen=True)
class CascadeConfig:
    """Depth-L chain of tabulated filters followed by one shared polynomial.

    filters[l] maps nonnegative integer frequencies to complex gains; the
    gain at -k is the conjugate of the gain at k (real impulse responses), so
    real signals stay real through every layer. Gains must be tabulated for
    every frequency reachable at that layer, and the DC gain must be real.
    """

    depth: int
    activation: PolyActivation
    filters: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if len(self.filters) != self.depth:
            raise ConfigError(
                f"need {self.depth} filter tables, got {len(self.filters)}"
            )
        tables = []
        for i, table in enumerate(self.filters, start=1):
            fixed = {}
            for k, gain in dict(table).items():
                if int(k) != k or k < 0:
                    raise ConfigError(
                        f"layer {i} filter keys must be nonnegative integers, got {k!r}"
                    )
                fixed[int(k)] = complex(gain)
            if 0 in fixed and fixed[0].imag != 0:
                raise ConfigError(f"layer {i} DC gain must be real")
            tables.append(fixed)
        object.__setattr__(self, "filters", tuple(tables))


def apply_filter(sig: FourierSignal, table: Mapping[int, complex], layer: int = 1) -> FourierSignal:
    """Multiply each coefficient by the tabulated gain at its frequency."""
    out = np.empty_like(sig.coeffs)
    for m in range(-sig.bandwidth, sig.bandwidth + 1):
        out[m + sig.bandwidth] = sig.coeff(m) * _filter_gain(table, m, layer)
    return FourierSignal(bandwidth=sig.bandwidth, coeffs=out)


def simulate_cascade(cfg: CascadeConfig, tone: ToneInput) -> list[FourierSignal]:
    """Run filter -> activation for each layer; returns the per-layer outputs."""
    states = []
    x = tone.to_signal()
    for layer in range(1, cfg.depth + 1):
        y = apply_filter(x, cfg.filters[layer - 1], layer)
        x = poly_apply_coeffs(y, cfg.activation)
        states.append(x)
    return states


@dataclass(frozen=True)
class TopPowerReport:
    """Closed-form top-harmonic power of a cascade, with its log decomposition.

    power multiplies |a_d| ** (2 (d^L - 1) / (d - 1)), (A/2) ** (2 d^L), and
    |H_l(d^(l-1) k0)| ** (2 d^(L-l+1)) across layers. When any chain gain
    vanishes the cascade is degenerate: power is 0 and the natural-log
    decomposition (constant + per-layer filter terms) is unavailable.
    """

    top_frequency: int
    power: float
    degenerate: bool
    log_power: float | None
    log_constant: float | None
    layer_log_terms: tuple | None


def closed_form_top_power(cfg: CascadeConfig, tone: ToneInput) -> TopPowerReport:
    d = cfg.activation.degree
    if d < 2:
        raise PreconditionError(f"cascade activation degree must be >= 2, got {d}")
    L = cfg.depth
    a_top = abs(complex(cfg.activation.coeffs[-1]))
    top_freq = d**L * tone.k0
    gains = []
    for layer in range(1, L + 1):
        k = d ** (layer - 1) * tone.k0
        gains.append(abs(_filter_gain(cfg.filters[layer - 1], k, layer)))
    if any(g == 0.0 for g in gains):
        return TopPowerReport(
            top_frequency=top_freq,
            power=0.0,
            degenerate=True,
            log_power=None,
            log_constant=None,
            layer_log_terms=None,
        )
    a_exponent = 2 * (d**L - 1) // (d - 1)
    power = a_top**a_exponent * (tone.amplitude / 2.0) ** (2 * d**L)
    for layer, g in enumerate(gains, start=1):
        power *= g ** (2 * d ** (L - layer + 1))
    log_constant = a_exponent * np.log(a_top) + 2 * d**L * np.log(tone.amplitude / 2.0)
    layer_terms = tuple(
        2 * d ** (L - layer + 1) * np.log(g) for layer, g in enumerate(gains, start=1)
    )
    return TopPowerReport(
        top_frequency=top_freq,
        power=float(power),
        degenerate=False,
        log_power=float(log_constant + sum(layer_terms)),
        log_constant=float(log_constant),
        layer_log_terms=layer_terms,
    )


# --- 2D convolutional surrogate ----------------------------------------------

@dataclass(frozen=True)
class Activation2d:
    """Pointwise activation for the 2D cascade."""

    kind: str
    coeffs: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in ACTIVATION_KINDS:
            raise ConfigError(
                f"unknown activation {self.kind!r}; expected one of {ACTIVATION_KINDS}"
            )
        if self.kind == "polynomial":
            if not self.coeffs:
                raise ConfigError("polynomial activation needs coefficients")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        elif self.coeffs:
            raise ConfigError(f"{self.kind} takes no coefficients")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return x
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "leaky_relu":
            return np.where(x >= 0.0, x, LEAKY_SLOPE * x)
        if self.kind == "silu":
            return x / (1.0 + np.exp(-x))
        return np.polyval(self.coeffs[::-1], x)


@dataclass(frozen=True)
class Cascade2dConfig:
    """Seeded single-channel conv stack: depth layers of conv + activation.

    Kernels are drawn per layer from a zero-mean normal with variance
    2 / fan_in (fan_in = kernel_size ** 2). Each kernel is applied in its
    all-pass form: the plane's spectrum is multiplied by K(w)/|K(w)|, the
    kernel's unit-magnitude frequency response. A lone random kernel's raw
    radial response would swing the tail profile by an order of magnitude
    more than any activation effect; wide decoders average that coloration
    away across channels, and the single-channel surrogate removes it
    exactly, so uplift comparisons isolate the activation.
    """

    depth: int
    activation: Activation2d
    kernel_size: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")


def _allpass_response(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Unit-magnitude frequency response carrying the kernel's phase."""
    k = kernel.shape[0]
    padded = np.zeros(shape, dtype=np.float64)
    padded[:k, :k] = kernel
    padded = np.roll(padded, shift=(-(k // 2), -(k // 2)), axis=(0, 1))
    response = np.fft.fft2(padded)
    mags = np.abs(response)
    return np.divide(response, mags, out=np.ones_like(response), where=mags > 0)


def cascade2d(plane: np.ndarray, cfg: Cascade2dConfig) -> np.ndarray:
    """Push a plane through the conv/activation stack.

    Convolutions are circular (spectral) with unit-magnitude kernel
    responses, so the linear part of the cascade never recolors the radial
    profile; with the identity activation the power spectrum is preserved
    exactly. The final output is rescaled to the input's standard deviation
    so downstream energy comparisons measure spectral shape rather than
    gain. The mean is deliberately left wherever the cascade put it: the
    spectrum module removes it anyway, while pixel-domain consumers keep an
    honest view of what the nonlinearity did.
    """
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"plane must be 2D, got shape {x.shape}")
    in_std = float(x.std())
    rng = np.random.default_rng(cfg.seed)
    k = cfg.kernel_size
    for _ in range(cfg.depth):
        kernel = rng.normal(0.0, np.sqrt(2.0 / (k * k)), size=(k, k))
        gain = _allpass_response(kernel, x.shape)
        x = np.fft.ifft2(np.fft.fft2(x) * gain).real
        x = cfg.activation(x)
    out_std = float(x.std())
    if out_std > 0.0 and in_std > 0.0:
        x = x * (in_std / out_std)
    return x


# --- seeded noise fields -----------------------------------------------------

def power_law_field(size: int, alpha: float, seed: int) -> np.ndarray:
    """Random-phase field whose power spectrum is exactly rho^(-alpha).

    Phases come from the FFT of seeded white noise (hence Hermitian), the
    amplitude at each frequency is rho^(-alpha/2) with DC forced to zero, and
    the result is normalized to zero mean and unit variance.
    """
    if size < 8 or (size & (size - 1)) != 0:
        raise DimensionError(f"size must be a power of two >= 8, got {size}")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((size, size))
    spectrum = np.fft.fft2(white)
    mags = np.abs(spectrum)
    phases = np.divide(spectrum, mags, out=np.ones_like(spectrum), where=mags > 0)

    freqs = np.fft.fftfreq(size, d=1.0 / size)
    nyq = size / 2.0
    rho = np.sqrt(freqs[:, None] ** 2 + freqs[None, :] ** 2) / nyq
    amp = np.zeros_like(rho)
    nonzero = rho > 0
    amp[nonzero] = rho[nonzero] ** (-alpha / 2.0)

    plane = np.fft.ifft2(phases * amp).real
    plane -= plane.mean()
    std = plane.std()
    if std == 0.0:
        raise DomainError("degenerate field: zero variance")
    return plane / std


def pink_noise(size: int, seed: int) -> np.ndarray:
    """Seeded pink-noise plane: amplitude ~ 1/rho (power exponent 2)."""
    return power_law_field(size, alpha=2.0, seed=seed)


# Fixed affine map from unit-variance synthetic fields to 8-bit intensities.
# The offset centers reals mid-range; the scale trades headroom (clipping
# stays under ~1% on pink noise) against the strength of pixel-domain class
# cues.  Deliberately NOT per-image normalization: a field's mean survives as
# a statistic of the rendered image.
PIXEL_OFFSET = 128.0
PIXEL_SCALE = 48.0


def to_pixel_plane(
    field: np.ndarray, scale: float = PIXEL_SCALE, offset: float = PIXEL_OFFSET
) -> np.ndarray:
    """Render a synthetic field to integer-valued intensities in [0, 255]."""
    return np.clip(np.round(offset + scale * np.asarray(field, dtype=np.float64)), 0.0, 255.0)


# --- serialization ------------------------------------------------------------

def cascade_config_to_json(cfg: "CascadeConfig | Cascade2dConfig") -> dict:
    """Documented JSON form for cascade configs.

    {"depth": int,
     "activation": {"kind": str, "coeffs": [...]?},
     "filters": [[k, re, im], ...] per layer   (1D tabulated chains only),
     "kernel_size": int, "seed": int            (2D conv cascades only)}
    """
    if isinstance(cfg, CascadeConfig):
        act = {"kind": "polynomial", "coeffs": [[c.real, c.imag] for c in cfg.activation.coeffs]}
        filters = [
            [[k, gain.real, gain.imag] for k, gain in sorted(table.items())]
            for table in cfg.filters
        ]
        return {"depth": cfg.depth, "activation": act, "filters": filters}
    if isinstance(cfg, Cascade2dConfig):
        act = {"kind": cfg.activation.kind}
        if cfg.activation.kind == "polynomial":
            act["coeffs"] = list(cfg.activation.coeffs)
        return {
            "depth": cfg.depth,
            "activation": act,
            "kernel_size": cfg.kernel_size,
            "seed": cfg.seed,
        }
    raise ConfigError(f"unsupported config type {type(cfg).__name__}")


def cascade_config_from_json(data: Mapping) -> "CascadeConfig | Cascade2dConfig":
    """Inverse of cascade_config_to_json; the presence of 'filters' selects 1D."""
    try:
        depth = int(data["depth"])
        act_spec = data["activation"]
        kind = act_spec["kind"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed cascade config: {exc}") from exc
    if "filters" in data:
        if kind != "polynomial":
            raise ConfigError("tabulated cascades use polynomial activations")
        coeffs = np.array([complex(re, im) for re, im in act_spec["coeffs"]])
        filters = tuple(
            {int(k): complex(re, im) for k, re, im in layer} for layer in data["filters"]
        )
        return CascadeConfig(depth=depth, activation=PolyActivation(coeffs), filters=filters)
    act = Activation2d(kind=kind, coeffs=tuple(act_spec.get("coeffs", ())))
    return Cascade2dConfig(
        depth=depth,
        activation=act,
        kernel_size=int(data.get("kernel_size", 3)),
        seed=int(data.get("seed", 0)),
    )
