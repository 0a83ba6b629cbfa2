"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration value or file."""
