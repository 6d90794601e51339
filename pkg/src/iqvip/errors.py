"""Exception types raised by the solver library."""


class IqvipError(Exception):
    """Base class for all library errors."""


class DimensionError(IqvipError, ValueError):
    """Vector or matrix shapes do not agree."""


class InfeasibleProjection(IqvipError):
    """A custom projector returned a point that is not in the target set."""


class NonFiniteError(IqvipError, FloatingPointError):
    """An integration produced NaN or Inf.

    Usually means the step size is too large for the chosen flow.
    """

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite state at iteration {iteration}")


class InvalidCertificate(IqvipError, ValueError):
    """L**2 + alpha**2 - 2*alpha*beta is negative, so rho is undefined."""

    def __init__(self, discriminant: float):
        self.discriminant = discriminant
        super().__init__(
            f"negative discriminant L^2 + alpha^2 - 2 alpha beta = {discriminant:.6g}"
        )


class ConditionViolated(IqvipError):
    """The strong-monotonicity condition rho + mu < beta does not hold."""


class ExponentMismatch(IqvipError, ValueError):
    """Fixed-time exponents are not of the form r1 = 1 - 2/nu, r2 = 1 + 2/nu."""


class UnreachableDestination(IqvipError):
    def __init__(self, origin, destination):
        self.origin = origin
        self.destination = destination
        super().__init__(f"no path from {origin!r} to {destination!r}")


class ConfigError(IqvipError, ValueError):
    """A problem or network file is malformed.

    ``field`` names the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
