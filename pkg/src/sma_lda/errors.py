"""Exception types raised across the package."""


class InputError(ValueError):
    """An input violates a documented precondition."""


class UndefinedFractionError(InputError):
    """Loss fractions requested for a history with zero total loss."""


class RegressionDomainError(InputError):
    """The double-log link is undefined for the supplied loss component."""


class ResolutionError(RuntimeError):
    """The discretization grid cannot resolve the requested quantity."""


class SlaUndefinedError(InputError):
    """Frequency too low for the single-loss approximation at this level."""


class InsufficientDataError(InputError):
    """Too few observations for a severity fit."""


class ConvergenceError(RuntimeError):
    """The likelihood maximization did not converge.

    The best iterate found is kept on ``best`` so callers can inspect it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
