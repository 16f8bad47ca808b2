"""Exception hierarchy shared by the numerical engine."""


class RisInvestError(Exception):
    """Base class for all engine errors."""


class ParameterError(RisInvestError, ValueError):
    """A parameter violates its documented domain."""


class QuadratureError(RisInvestError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is usable.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DivergenceError(QuadratureError):
    """A semi-infinite integral keeps growing as the truncation point moves out."""


class SingularityError(QuadratureError):
    """A symmetrized principal-value integrand does not settle near zero."""


class OutsideROCError(RisInvestError):
    """A transform was evaluated outside its region of convergence."""

    def __init__(self, message, s_a=None, s_b=None):
        super().__init__(message)
        self.s_a = s_a
        self.s_b = s_b


class PoleError(OutsideROCError):
    """The evaluation point hits a pole of a rational transform."""


class ConfigError(RisInvestError):
    """A scenario file could not be parsed or validated."""
