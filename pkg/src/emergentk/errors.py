"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class EmergentKError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(EmergentKError, ValueError):
    pass


class NonConvergence(EmergentKError):
    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message if iterations is None else f"{message} (iterations={iterations})")
        self.iterations = iterations


class NotDefective(EmergentKError):
    pass


class MultiBlock(EmergentKError):
    pass


class NotSingleEigenvalue(EmergentKError):
    pass


class SingularP(EmergentKError):
    pass


class AdiabaticSingular(EmergentKError):
    pass


class EPInput(EmergentKError):
    pass


class DegenerateSpectrum(EmergentKError):
    pass


class StepSizeTooLarge(EmergentKError):
    pass


class DegenerateLambdas(EmergentKError):
    pass


class UnsupportedSize(EmergentKError):
    pass


class NotSingleBlock(EmergentKError):
    pass


class NeighborhoodTooWide(EmergentKError):
    pass


class ZeroAnchor(EmergentKError):
    pass


class EPParam(EmergentKError, ValueError):
    pass


class DPParam(EmergentKError, ValueError):
    pass


class TransportError(EmergentKError):
    pass


class PositivityLost(TransportError):
    pass


class BranchMismatch(EmergentKError):
    pass


class DegenerateDenominator(EmergentKError):
    pass


class InsufficientData(EmergentKError):
    pass


class UnknownModel(EmergentKError, KeyError):
    pass
