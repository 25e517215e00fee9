"""Exception types raised across the package."""


class LambdaPropError(Exception):
    """Base class for all package errors."""


class InvalidConfig(LambdaPropError, ValueError):
    """A run configuration violates one of its invariants."""


class EdgeAmplitudeTooLarge(InvalidConfig):
    """A pulse has not decayed enough at the edges of the time window."""


class DegenerateAngles(LambdaPropError, ValueError):
    """Mixing angles are undefined because the fields vanish (0/0)."""


class StepUnstable(LambdaPropError, RuntimeError):
    """The time integrator drifted off the unit sphere; refine the grid."""


class ShockDetected(LambdaPropError, ArithmeticError):
    """Characteristics of the detuning angle crossed (multi-valued solution)."""


class AdiabaticityHorizon(LambdaPropError, ArithmeticError):
    """No first-order solution exists: the pulse energy left is too small."""


class ShockWarning(UserWarning):
    """Characteristics are close to crossing."""
