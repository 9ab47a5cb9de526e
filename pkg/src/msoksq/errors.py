"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid hyperparameters, alphabets or experiment settings."""


class DataError(ValueError):
    """Malformed or unusable input data (e.g. a bad Iris CSV)."""
