"""Exception types shared across the package."""


class DSComError(Exception):
    """Base class for all package errors."""


class ParseError(DSComError):
    """Malformed input file; carries path and 1-based line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class ValidationError(DSComError):
    """Data violates a structural contract (bad endpoint, non-edge pair, ...)."""


class DimensionError(DSComError):
    """Shape mismatch between related inputs."""


class ParameterError(DSComError):
    """Argument outside its documented domain."""


class SizeLimitError(DSComError):
    """Instance too large for an exact/enumeration code path."""


class NumericError(DSComError):
    """Numerical failure: divergence, non-convergence, NaN/Inf."""


class ConfigError(DSComError):
    """Bad or incomplete run configuration."""
