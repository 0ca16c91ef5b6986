"""Exception taxonomy shared across the toolkit.

Every error raised on a bad input derives from SpectailError so callers
(including the CLI) can map failure classes to exit codes without string
matching.
"""


class SpectailError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SpectailError):
    """Array shape violates a contract (non-square, not a power of two, ...)."""


class SizeError(DimensionError):
    """An image or plane is too small for the requested operation."""


class DecodeError(SpectailError):
    """An image file could not be read or decoded."""


class DataError(SpectailError):
    """Malformed user-supplied data (manifest rows, labels, counts)."""


class ConfigError(SpectailError):
    """An invalid configuration object (schedules, cascades, filters)."""


class FitError(SpectailError):
    """A regression band is too thin or otherwise unusable."""


class DomainError(SpectailError):
    """A numeric argument lies outside the supported domain."""


class PreconditionError(SpectailError):
    """A documented mathematical precondition does not hold."""


class MetricError(SpectailError):
    """A metric is undefined for the provided labels."""


class NumericError(SpectailError):
    """A computation degenerated (zero norms, non-finite values)."""
