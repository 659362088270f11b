"""Exception hierarchy shared by all modules."""


class ShipDobError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ShipDobError, ValueError):
    """A parameter set or scenario document violates an invariant."""


class SingularMassError(ConfigError):
    """The lower 2x2 block of the mass matrix is numerically singular."""


class CaseViolationError(ConfigError):
    """Off-diagonal inverse-mass coupling is outside the supported regime
    (kappa23*kappa32 >= kappa22*kappa33)."""


class StabilityConditionError(ShipDobError, ValueError):
    """lambda_min(Gamma) * sigma <= 1/2, so no ultimate bound exists."""


class FactorizationError(ShipDobError, ArithmeticError):
    """Covariance could not be factorized even after jitter retries."""


class SingularInnovationError(ShipDobError, ArithmeticError):
    """Innovation covariance is not invertible."""


class DivergenceError(ShipDobError, ArithmeticError):
    """A simulated quantity left the finite range, or the discretized
    observer is predicted to be unstable."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class SeedMismatchError(ShipDobError, ValueError):
    """Two runs that must share random streams were given different seeds."""


class UndefinedChannelError(ShipDobError, ValueError):
    """A disturbance channel is identically zero, so its relative error has
    no normalization."""
