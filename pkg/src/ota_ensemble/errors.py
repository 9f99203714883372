"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 2, data problems
exit 3, calibration failures exit 4.
"""


class ParameterError(ValueError):
    """An argument is outside its documented domain."""


class ConfigError(ValueError):
    """An experiment config file or CLI flag set is invalid."""


class DataFormatError(ValueError):
    """A score-dataset file is malformed or violates dataset invariants."""


class CalibrationError(RuntimeError):
    """Noise calibration could not bracket or reach the requested target."""


class ProtocolViolationError(RuntimeError):
    """A client claimed participation it is not entitled to (gain below threshold)."""
