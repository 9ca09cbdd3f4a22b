"""Exception types shared across the package."""


class DetNMFError(Exception):
    """Base class for all errors raised by detnmf."""


class ResidualAboveTolerance(DetNMFError):
    """The data matrix is not numerically of the requested rank."""

    def __init__(self, message, model=None, ratio=None):
        super().__init__(message)
        self.model = model
        self.ratio = ratio


class CycleGuardExceeded(DetNMFError):
    pass


class LpFailure(DetNMFError):
    pass


class ZeroVector(DetNMFError):
    pass


class RankDeficient(DetNMFError):
    def __init__(self, message, lineality=None):
        super().__init__(message)
        self.lineality = lineality


class ExplosionGuard(DetNMFError):
    pass


class InitSingular(DetNMFError):
    pass


class DegenerateCofactor(DetNMFError):
    pass


class NegativeData(DetNMFError):
    pass


class ZeroColumn(DetNMFError):
    pass


class ShapeMismatch(DetNMFError, ValueError):
    pass


class CertifyBudgetExceeded(DetNMFError):
    pass
