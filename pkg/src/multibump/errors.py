"""Exception hierarchy. Every failure the library signals derives from MultibumpError."""


class MultibumpError(Exception):
    """Base class."""


class ConfigError(MultibumpError, ValueError):
    """Invalid parameter combination; the message names the offending key."""


class DomainError(ConfigError):
    pass


class BetaTooLarge(ConfigError):
    pass


class DimensionError(ConfigError):
    pass


class GridTooCoarse(ConfigError):
    pass


class ConvergenceError(MultibumpError, RuntimeError):
    """A numerical procedure failed to converge or to certify its result."""


class NoBracket(ConvergenceError):
    pass


class StiffFailure(ConvergenceError):
    pass


class NoPlateau(ConvergenceError):
    pass


class NoInteriorMax(ConvergenceError):
    pass


class KrylovStall(ConvergenceError):
    pass


class NoContraction(ConvergenceError):
    pass


class ShiftSingular(ConvergenceError):
    pass


class BallOutsideGrid(MultibumpError, ValueError):
    pass
