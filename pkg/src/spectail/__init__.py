"""spectail: radial-spectrum tail analysis for synthetic-image detection.

The package measures how pointwise nonlinearities in convolutional synthesis
pipelines push power into the high-frequency tail of an image's radial
spectrum, provides exact small-scale oracles for that mechanism, and trains a
toy two-branch detector whose frequency branch is used only as a training-time
teacher.
"""

from .errors import (
    ConfigError,
    DataError,
    DecodeError,
    DimensionError,
    DomainError,
    FitError,
    MetricError,
    NumericError,
    PreconditionError,
    SizeError,
    SpectailError,
)
from .features import DctStats, FEATURE_LENGTH, dct_local_stats, extract_features
from .harmonics import (
    Activation2d,
    Cascade2dConfig,
    CascadeConfig,
    FourierSignal,
    PolyActivation,
    ToneInput,
    cascade2d,
    check_theorem1,
    closed_form_top_power,
    pink_noise,
    poly_apply_coeffs,
    poly_apply_time,
    power_law_field,
    random_real_signal,
    simulate_cascade,
    to_pixel_plane,
)
from .ingest import center_crop_pow2, decode, to_ycbcr
from .spectrum import (
    PowerLawFit,
    RadialSpectrum,
    TailUplift,
    fit_power_law,
    normalize_anchor,
    radial_log_power,
    tail_uplift,
)
from .stal import (
    CurriculumSchedule,
    LossWeights,
    ToyStalModel,
    TrainConfig,
    balanced_accuracy,
    curriculum_weight,
    predict,
    teacher_targets,
    total_loss,
    train,
)
from .transforms import QuantTable, blockwise_dct, blockwise_idct, fft2d, ifft2d, jpeg_degrade

__version__ = "0.1.0"
