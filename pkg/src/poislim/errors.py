"""Exception types shared across the package."""


class PoislimError(Exception):
    """Base class for all package errors."""


class DomainError(PoislimError, ValueError):
    """An argument is outside its documented domain."""


class ConfigurationError(PoislimError, ValueError):
    """A model or scenario description is internally inconsistent."""


class CapabilityError(PoislimError):
    """The requested operation is not available for this model/regime."""


class PreconditionError(PoislimError):
    """A documented precondition does not hold for the given inputs."""


class SingularityError(PoislimError, ArithmeticError):
    """An integrand or ratio hits a zero/infinite value where it must not."""


class DegenerateCurvatureError(SingularityError):
    """Second-order information is non-positive where positivity is required."""


class EstimationError(PoislimError, RuntimeError):
    """An estimator could not produce a value (empty window, -inf curve, ...)."""


class NumericalError(PoislimError, ArithmeticError):
    """A numerical routine failed beyond recoverable tolerance."""
