class NoisyNashError(Exception):
    """Base class for errors raised by this package."""


class LatticeBudgetExceeded(NoisyNashError):
    pass


class NotNegativeDefinite(NoisyNashError, ValueError):
    pass


class PointOutsideSet(NoisyNashError, ValueError):
    pass


class BallDoesNotFit(NoisyNashError, ValueError):
    pass


class BadASpec(NoisyNashError, ValueError):
    pass


class QuadratureFailure(NoisyNashError):
    pass


class RegularityViolated(NoisyNashError):
    def __init__(self, message, probe=None):
        super().__init__(message)
        self.probe = probe


class SingularSigma(NoisyNashError, ValueError):
    pass


class ZeroCapacity(NoisyNashError, ValueError):
    pass


class DeltaTooLarge(NoisyNashError, ValueError):
    pass


class ConfigError(NoisyNashError):
    """Raised with every validation problem found, not only the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
