"""Exception hierarchy; each class maps to one CLI exit code."""


class WifiRadarError(Exception):
    exit_code = 1


class ConfigError(WifiRadarError, ValueError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(WifiRadarError, ValueError):
    """Malformed, empty or mismatched data (shape errors included)."""

    exit_code = 3


class ShapeError(DataError):
    pass


class EmptySeriesError(DataError):
    pass


class StateError(DataError):
    """Operation applied to a series in the wrong calibration state."""


class RangeError(DataError):
    """Evaluation point outside the valid domain (e.g. scene duration)."""


class DegenerateInputError(WifiRadarError, ValueError):
    """Numerically degenerate input: all-zero CIR, zero RMS, empty frame."""

    exit_code = 4
