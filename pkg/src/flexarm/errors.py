"""Exception types raised across the toolkit."""


class ModelError(ValueError):
    """Invalid model data: dimension mismatch or a violated invariant."""


class SingularMatrixError(ArithmeticError):
    """A matrix that must be inverted is singular or not positive definite."""


class BeamModeError(RuntimeError):
    """The characteristic-equation root finder did not converge."""


class DesignError(RuntimeError):
    """LQR design failed (unstabilizable pair, undetectable weights, residual check)."""


class IntegrationError(RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t = {t:.6g} s)")
        self.t = t


class DivergenceError(RuntimeError):
    """The closed loop left the configured state bound."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t = {t:.6g} s)")
        self.t = t


class ConfigError(ValueError):
    """Bad configuration file; `key` is the offending ``section.key``."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
