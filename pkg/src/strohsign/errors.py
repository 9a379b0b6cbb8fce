"""Exception hierarchy shared by all modules."""


class StrohSignError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(StrohSignError, ValueError):
    pass


class GeometryError(InvalidParameterError):
    pass


class SingularMatrixError(StrohSignError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class AxisSpectrumError(StrohSignError, ArithmeticError):
    """An eigenvalue lies on (or too close to) the imaginary axis."""


class DefectiveMatrixError(StrohSignError, ArithmeticError):
    """Eigenvalues too close together for a trustworthy eigendecomposition."""


class ConvergenceError(StrohSignError, ArithmeticError):
    pass


class NotSubsonicError(StrohSignError, ValueError):
    """The requested speed lies outside the subsonic domain."""


class NoSurfaceWaveError(StrohSignError):
    """No subsonic surface wave exists for the given configuration.

    This is a legitimate physical outcome, not a numerical failure.
    """


class ConfigError(StrohSignError, ValueError):
    pass
