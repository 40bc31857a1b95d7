"""Exception types raised by gaussfisher."""


class GaussFisherError(Exception):
    """Base class for all library errors."""


class DomainError(GaussFisherError, ValueError):
    """A function was called outside the parameter domain it is defined on."""


class SingularCovarianceError(GaussFisherError, ValueError):
    """The covariance matrix is (numerically) singular."""


class QuadratureError(GaussFisherError, RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


class ConfigError(GaussFisherError, ValueError):
    """A scenario configuration is invalid."""


class NumericFailure(GaussFisherError, RuntimeError):
    """A scenario aborted because a numerical routine failed."""
