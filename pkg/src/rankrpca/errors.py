"""Exception and warning types raised across the package."""


class RpcaError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(RpcaError, ValueError):
    pass


class NonFiniteError(RpcaError, FloatingPointError):
    """A matrix or objective value contains NaN or Inf."""


class SingularGram(RpcaError, ArithmeticError):
    """The p x p Gram matrix X^T X could not be factorized, even with a ridge."""


class InvalidMode(RpcaError, ValueError):
    pass


class ZeroTruth(RpcaError, ValueError):
    pass


class InfinitePsnr(RpcaError, ArithmeticError):
    """Recovered and reference images agree exactly, so PSNR is unbounded."""


class ConfigError(RpcaError, ValueError):
    pass


class RankDeficientInput(UserWarning):
    """The matrix handed to the rank-constrained prox has rank below p."""


class StepsizeWarning(UserWarning):
    pass
