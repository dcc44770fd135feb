"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates one of its invariants."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss, bad data)."""
