"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or input file; message names the offending field."""


class ContractError(RuntimeError):
    """A simulation precondition was violated at runtime (e.g. missing plaintext)."""
