"""Static clutter estimation (temporal mean CIR) and residual CIRs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptySeriesError, ShapeError, StateError
from .series import CirSeries


@dataclass(frozen=True)
class ClutterProfile:
    """Clutter estimate on a delay grid.

    ``mean_values`` is ``(n_delay,)`` for the whole-run mean, or
    ``(n_time, n_delay)`` for a sliding-window estimate.
    """

    delay_grid_s: np.ndarray
    mean_values: np.ndarray
    snapshot_count: int


def estimate_clutter(series: CirSeries, window: int | None = None) -> ClutterProfile:
    """Per-bin mean of calibrated CIRs.

    ``window=None`` averages over the whole run.  An integer gives a
    centred moving average of that many snapshots instead (for long runs
    with drifting clutter); edges use the reflected series.
    """
    if series.calibration_state != "calibrated":
        raise StateError(
            f"clutter needs calibrated CIRs, got {series.calibration_state!r}"
        )
    if len(series) == 0:
        raise EmptySeriesError("empty CIR series")
    if window is None:
        mean = series.values.mean(axis=0)
    else:
        if window < 1:
            raise ValueError("window must be >= 1")
        v = series.values
        mean = (ndimage.uniform_filter1d(v.real, window, axis=0, mode="reflect")
                + 1j * ndimage.uniform_filter1d(v.imag, window, axis=0, mode="reflect"))
    return ClutterProfile(series.delay_grid_s, mean, len(series))


def residual(series: CirSeries, clutter: ClutterProfile) -> CirSeries:
    """h(tau, t) - clutter(tau), tagged ``residual``."""
    if (clutter.delay_grid_s.shape != series.delay_grid_s.shape
            or not np.allclose(clutter.delay_grid_s, series.delay_grid_s, rtol=0, atol=1e-18)):
        raise ShapeError("clutter and series delay grids differ")
    mean = clutter.mean_values
    if mean.ndim == 2 and mean.shape != series.values.shape:
        raise ShapeError("sliding clutter estimate does not match the series")
    return series.replace(values=series.values - mean, calibration_state="residual")


def remove_clutter(series: CirSeries, window: int | None = None) -> tuple[CirSeries, ClutterProfile]:
    profile = estimate_clutter(series, window)
    return residual(series, profile), profile
