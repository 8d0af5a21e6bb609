"""Exception types raised across the package."""


class InvalidEndpoints(ValueError):
    pass


class DivisionByZeroInterval(ZeroDivisionError):
    pass


class IntervalOverflow(OverflowError):
    pass


class NegativeUncertainty(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NonPositiveClip(ValueError):
    pass


class TraceMismatch(ValueError):
    pass


class BadCheckpoint(ValueError):
    pass


class MissingColumn(KeyError):
    pass


class ParseError(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class UncoveredFeature(ValueError):
    pass


class DivergenceDetected(RuntimeError):
    """Training stopped because the loss blew up.

    ``trace`` holds the per-epoch ``(epoch, Interval)`` pairs recorded before
    the stop and ``model`` the last parameters that produced a finite loss.
    """

    def __init__(self, message, trace=None, model=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.model = model
