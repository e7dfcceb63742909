"""Exception hierarchy shared across the package."""


class FootfallError(Exception):
    """Base class for all package errors."""


class ParseError(FootfallError, ValueError):
    """Malformed input file (CSV/WAV/JSON)."""


class DegenerateInputError(FootfallError, ValueError):
    """Input for which the requested quantity is undefined (all zeros, zero variance...)."""


class FilterDesignError(FootfallError, ValueError):
    pass


class WindowError(FootfallError, ValueError):
    """Signal too short for the configured detector windows."""


class BoundaryError(FootfallError, IndexError):
    """Extraction window falls outside the signal."""


class ShapeError(FootfallError, ValueError):
    pass


class ConvergenceError(FootfallError, RuntimeError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DivergenceError(FootfallError, FloatingPointError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ShortfallError(FootfallError, RuntimeError):
    def __init__(self, message, counts=None):
        super().__init__(message)
        self.counts = counts or {}


class ConfigError(FootfallError, ValueError):
    """Invalid pipeline configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
