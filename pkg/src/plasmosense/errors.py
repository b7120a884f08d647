"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems → 2, numerical
failures → 3, geometric regime violations → 4.
"""


class PlasmoSenseError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(PlasmoSenseError, ValueError):
    pass


class ConfigError(PlasmoSenseError, ValueError):
    pass


class NumericalError(PlasmoSenseError, ArithmeticError):
    pass


class ConditioningError(NumericalError):
    pass


class ResonanceProximityError(NumericalError):
    """The contrast sits (numerically) on the NP spectrum."""

    def __init__(self, lam, distance):
        self.lam = lam
        self.distance = distance
        super().__init__(
            f"contrast {lam!r} is within {distance:.3e} of the NP spectrum; "
            "the second-kind system is singular"
        )


class DegenerateEigenvalueError(NumericalError):
    pass


class PeakDetectionError(NumericalError):
    pass


class MeasurementGeometryError(NumericalError):
    """Design matrix of a recovery stage is rank deficient."""


class InsufficientDataError(PlasmoSenseError, ValueError):
    pass


class StallError(NumericalError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class RegimeError(PlasmoSenseError):
    """The two particles violate the intermediate-regime assumption."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class NearBoundaryError(RegimeError):
    pass
