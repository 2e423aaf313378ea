"""Exception types raised across the package."""


class DarkGateError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DarkGateError, ValueError):
    pass


class DomainError(DarkGateError, ValueError):
    """A closed-form expression was evaluated outside its domain."""


class SamplingError(DarkGateError, RuntimeError):
    """Rejection sampling could not place all ensemble atoms."""


class SingularityError(DarkGateError, ZeroDivisionError):
    def __init__(self, message, omega=None):
        super().__init__(message)
        self.omega = omega


class CoverageError(DarkGateError, ValueError):
    """Quadrature nodes fall outside the sampled frequency grid."""


class ConsistencyError(DarkGateError, ValueError):
    pass


class DivergenceError(DarkGateError, FloatingPointError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
