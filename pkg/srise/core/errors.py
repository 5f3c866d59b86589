# srise/core/errors.py


class SRISEError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class ConfigError(SRISEError):
    """Invalid configuration value, file or flag."""

    exit_code = 2


class InputError(SRISEError):
    """Missing or malformed input (file, directory, list)."""

    exit_code = 2


class DecodeError(InputError):
    """An image file exists but cannot be decoded."""


class DimensionError(SRISEError):
    """Shapes of images, masks or maps do not agree."""


class InferenceError(SRISEError):
    """The embedding backend failed."""


class DegenerateEmbeddingError(SRISEError):
    """An embedding has (near) zero norm and cannot be compared."""


class DegenerateMapError(SRISEError):
    """A saliency map is constant where variation is required."""
