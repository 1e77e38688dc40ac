"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DimensionError(ValueError):
    """A length along some axis is out of range for the requested geometry."""


class ConfigError(ValueError):
    """Invalid hyperparameter or configuration value; the message names the field."""


class WavError(OSError):
    """Malformed or unsupported WAV data."""
