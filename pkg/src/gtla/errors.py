"""Exception types shared across the package."""


class GtlaError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(GtlaError):
    """A file on disk does not match its expected format."""


class ConfigError(GtlaError):
    """A configuration object or file is invalid."""


class TrainingError(GtlaError):
    """Training aborted (e.g. non-finite gradients)."""
