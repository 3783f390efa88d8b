"""Exception types shared across the toolkit."""


class SpectroError(Exception):
    """Base class for all toolkit errors."""


class InvalidLayoutError(SpectroError):
    """Geometry or beam parameters outside the validity of the paraxial model."""


class InfeasibleDesignError(SpectroError):
    """No design satisfies the requested constraints."""


class DegenerateProfileError(SpectroError):
    """An intensity profile carries no usable weight."""


class InsufficientDataError(SpectroError):
    """Too few informative samples to run a reduction or fit."""


class UndefinedMetricError(SpectroError):
    """A metric is undefined for the given inputs (e.g. zero peak counts)."""


class MalformedInputError(SpectroError):
    """An input record or file does not parse against its declared format."""


class InvalidRegimeError(SpectroError):
    """A probability left [0, 1]; the linearized single-photon model is broken."""


class NeverCrossesError(SpectroError):
    """The multiplexed configuration can never outperform the baseline."""


class ConfigError(SpectroError):
    """A run configuration failed validation."""
