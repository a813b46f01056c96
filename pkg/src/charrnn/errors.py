"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with arguments outside its contract."""


class ConfigError(ValueError):
    """A run cannot be set up with the given corpus and settings."""
