"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the physical or logical domain of an operation."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class StateError(RuntimeError):
    """An object is used before it is ready (e.g. an untrained GAN)."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
