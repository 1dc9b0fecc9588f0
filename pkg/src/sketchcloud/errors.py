"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad option value, unknown key, shape mismatch."""


class DataError(ValueError):
    """Malformed or inconsistent data file / dataset content."""


class CheckpointError(RuntimeError):
    """Missing, corrupt, or incompatible checkpoint."""


class VocabularyError(ValueError):
    """A word outside the closed prompt vocabulary."""
