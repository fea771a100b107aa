"""Phase-coherent bistatic Wi-Fi radar: LoS-referenced CIR calibration and
delay-Doppler processing, with a synthetic bistatic scene generator."""

__version__ = "0.1.0"

from .config import CalibrationConfig, PreprocessConfig, RadioParams, StftParams
from .errors import (ConfigError, DataError, DegenerateInputError, EmptySeriesError,
                     WifiRadarError)
from .series import CfrSeries, CfrSnapshot, Cir, CirSeries

__all__ = [
    "__version__", "RadioParams", "PreprocessConfig", "CalibrationConfig", "StftParams",
    "CfrSnapshot", "CfrSeries", "Cir", "CirSeries", "WifiRadarError", "ConfigError",
    "DataError", "DegenerateInputError", "EmptySeriesError",
]
