class IlmError(Exception):
    pass


class ConfigError(IlmError, ValueError):
    """Invalid configuration or out-of-range parameter."""


class NumericError(IlmError, ArithmeticError):
    """Non-finite loss or gradient during training."""


class StateError(IlmError, RuntimeError):
    """Agent used before it is ready (e.g. encoding before obversion)."""


class BaselineError(IlmError, ValueError):
    """Degenerate naive baseline (y0 >= 1)."""
