"""Exception types shared across the package.

Exit-code mapping for the CLI lives in :mod:`expostdp.cli`; library code
raises these (or plain ``ValueError`` for bad arguments) and never exits.
"""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad grid spec, unknown approach, ...)."""


class DataError(ValueError):
    """Dataset ingestion or validation failure; message carries the position."""


class ConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, gradient_norm: float | None = None):
        super().__init__(message)
        self.gradient_norm = gradient_norm
