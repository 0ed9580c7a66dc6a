"""Exception hierarchy. Each family maps to one CLI exit code."""


class RamanMemError(Exception):
    exit_code = 1


class ConfigError(RamanMemError):
    """Unparseable or inconsistent run configuration."""

    exit_code = 2


class InvalidParameterError(RamanMemError, ValueError):
    exit_code = 2


class NumericalError(RamanMemError):
    exit_code = 3


class GridError(NumericalError):
    """Grids that do not match, or cannot represent the requested fields."""


class ResolutionError(GridError):
    pass


class InputError(NumericalError, ValueError):
    """Non-finite samples in an input field."""


class CoordinateError(NumericalError):
    """The integrated Rabi coordinate is not monotone."""


class StepSizeError(NumericalError):
    """Lattice march lost stability; refine the grid."""


class ConvergenceError(NumericalError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class UndefinedEfficiencyError(NumericalError):
    pass


class FitError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleCalibrationError(RamanMemError):
    exit_code = 4


class CalibrationError(InfeasibleCalibrationError):
    """The root finder could not bracket the calibration target."""
