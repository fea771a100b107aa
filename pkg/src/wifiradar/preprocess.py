"""Frequency-domain conditioning of raw CFR snapshots.

Order of operations (see :func:`preprocess_series`): RSSI outlier removal,
DC phase interpolation, notch magnitude repair, edge-attenuation
equalization, RMS normalization.  Snapshot-level steps work on the last
axis of any ``(..., K)`` array so they vectorize over a whole series.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .config import PreprocessConfig
from .errors import ConfigError, DegenerateInputError, EmptySeriesError, ShapeError
from .series import CfrSeries, CfrSnapshot


def attenuation_model(k, breakpoints=(680, 704), floor=0.6) -> np.ndarray:
    """Piecewise device edge attenuation A(k).

    1 up to ``|k| = k0``, linear down to ``floor`` at ``k1``, flat beyond.
    """
    k0, k1 = breakpoints
    ak = np.abs(np.asarray(k, dtype=float))
    ramp = 1.0 - (1.0 - floor) * (ak - k0) / (k1 - k0)
    return np.where(ak <= k0, 1.0, np.where(ak < k1, ramp, floor))


def _fill_plan(k: np.ndarray, fill: np.ndarray):
    """Left/right valid neighbours and weights for each bin in ``fill``."""
    valid = np.flatnonzero(~fill)
    targets = np.flatnonzero(fill)
    if valid.size == 0:
        raise ConfigError("no valid subcarriers to interpolate from")
    pos = np.searchsorted(valid, targets)
    left = valid[np.clip(pos - 1, 0, valid.size - 1)]
    right = valid[np.clip(pos, 0, valid.size - 1)]
    # one-sided neighbourhoods degrade to a hold
    left = np.where(pos == 0, right, left)
    right = np.where(pos == valid.size, left, right)
    span = (k[right] - k[left]).astype(float)
    w = np.divide(k[targets] - k[left], span, out=np.zeros(targets.size), where=span != 0)
    return targets, left, right, w


def _interp_last(arr: np.ndarray, plan) -> np.ndarray:
    targets, left, right, w = plan
    out = np.array(arr, copy=True)
    out[..., targets] = (1 - w) * arr[..., left] + w * arr[..., right]
    return out


# ---------------------------------------------------------------------------
# array-level steps
# ---------------------------------------------------------------------------

def dc_interpolate_values(values, k, cfg: PreprocessConfig) -> np.ndarray:
    values = np.asarray(values)
    k = np.asarray(k)
    lo, hi = cfg.dc_index_range
    dc = (k >= lo) & (k <= hi)
    if not dc.any():
        return values.copy()
    if not (k[0] < lo and k[-1] > hi):
        raise ConfigError("DC index range must lie strictly inside the subcarrier grid")

    keep = np.flatnonzero(~dc)
    phase = np.unwrap(np.angle(values[..., keep]), axis=-1)
    # bins either side of the DC gap, as positions in the reduced array
    p_left = np.searchsorted(keep, np.flatnonzero(dc)[0]) - 1
    p_right = p_left + 1
    kl, kr = k[keep[p_left]], k[keep[p_right]]
    # pick the 2*pi branch across the gap that continues the flank slope
    flank = 50
    d_left = np.diff(phase[..., max(p_left - flank, 0):p_left + 1], axis=-1)
    d_right = np.diff(phase[..., p_right:p_right + flank + 1], axis=-1)
    slope = np.median(np.concatenate([d_left, d_right], axis=-1), axis=-1)
    expected = slope * (kr - kl)
    jump = phase[..., p_right] - phase[..., p_left]
    phase[..., p_right:] += (2 * np.pi * np.round((expected - jump) / (2 * np.pi)))[..., None]

    full_phase = np.zeros(values.shape)
    full_phase[..., keep] = phase
    mag = np.abs(values)
    plan = _fill_plan(k, dc)
    full_phase = _interp_last(full_phase, plan)
    mag = _interp_last(mag, plan)
    out = np.array(values, dtype=complex, copy=True)
    out[..., dc] = mag[..., dc] * np.exp(1j * full_phase[..., dc])
    return out


def notch_repair_values(values, k, cfg: PreprocessConfig) -> np.ndarray:
    values = np.asarray(values)
    notch = np.isin(np.asarray(k), cfg.notch_indices)
    if not notch.any():
        return values.copy()
    mag = _interp_last(np.abs(values), _fill_plan(np.asarray(k), notch))
    out = np.array(values, dtype=complex, copy=True)
    out[..., notch] = mag[..., notch] * np.exp(1j * np.angle(values[..., notch]))
    return out


def equalize_values(values, k, cfg: PreprocessConfig) -> np.ndarray:
    a = attenuation_model(k, cfg.attenuation_breakpoints, cfg.attenuation_floor)
    if np.any(a <= 0):
        raise ConfigError("attenuation model reaches zero")
    return np.asarray(values) / a


def rms_normalize_values(values, k, cfg: PreprocessConfig) -> np.ndarray:
    values = np.asarray(values)
    ref = np.abs(np.asarray(k)) <= cfg.rms_reference_index_bound
    if not ref.any():
        raise ConfigError("RMS reference band contains no subcarriers")
    rms = np.sqrt(np.mean(np.abs(values[..., ref]) ** 2, axis=-1, keepdims=True))
    if np.any(rms == 0) or not np.all(np.isfinite(rms)):
        raise DegenerateInputError("zero RMS over the reference band")
    return values / rms


def preprocess_values(values, k, cfg: PreprocessConfig) -> np.ndarray:
    """All per-snapshot steps enabled in ``cfg``, in pipeline order."""
    out = np.asarray(values, dtype=complex)
    if cfg.dc_interpolation:
        out = dc_interpolate_values(out, k, cfg)
    if cfg.notch_repair:
        out = notch_repair_values(out, k, cfg)
    if cfg.edge_equalization:
        out = equalize_values(out, k, cfg)
    if cfg.rms_normalization:
        out = rms_normalize_values(out, k, cfg)
    return out


# ---------------------------------------------------------------------------
# snapshot / series API
# ---------------------------------------------------------------------------

def _check(s: CfrSnapshot):
    if np.shape(s.values) != np.shape(s.subcarrier_indices):
        raise ShapeError("snapshot values and indices differ in length")


def interpolate_dc_phase(s: CfrSnapshot, cfg: PreprocessConfig) -> CfrSnapshot:
    _check(s)
    return s.with_values(dc_interpolate_values(s.values, s.subcarrier_indices, cfg))


def repair_notches(s: CfrSnapshot, cfg: PreprocessConfig) -> CfrSnapshot:
    _check(s)
    return s.with_values(notch_repair_values(s.values, s.subcarrier_indices, cfg))


def equalize_edge_attenuation(s: CfrSnapshot, cfg: PreprocessConfig) -> CfrSnapshot:
    _check(s)
    return s.with_values(equalize_values(s.values, s.subcarrier_indices, cfg))


def normalize_rms(s: CfrSnapshot, cfg: PreprocessConfig) -> CfrSnapshot:
    _check(s)
    return s.with_values(rms_normalize_values(s.values, s.subcarrier_indices, cfg))


def phase_diff_profile(s: CfrSnapshot) -> np.ndarray:
    """arg(H(k+1) / H(k)) over consecutive subcarriers (diagnostic)."""
    v = np.asarray(s.values)
    if v.shape[-1] < 2:
        raise ShapeError("need at least two subcarriers")
    return np.angle(v[..., 1:] * np.conj(v[..., :-1]))


def preprocess_snapshot(s: CfrSnapshot, cfg: PreprocessConfig) -> CfrSnapshot:
    return s.with_values(preprocess_values(s.values, s.subcarrier_indices, cfg))


def outlier_mask(rssi_db, cfg: PreprocessConfig) -> np.ndarray:
    """True for snapshots to keep: RSSI not more than threshold below the running median."""
    rssi = np.asarray(rssi_db, dtype=float)
    if rssi.size == 0:
        raise EmptySeriesError("empty series")
    window = min(cfg.rssi_median_window, rssi.size)
    if window % 2 == 0:
        window -= 1
    baseline = ndimage.median_filter(rssi, size=max(window, 1), mode="reflect")
    return ~(rssi < baseline - cfg.rssi_drop_threshold_db)


def remove_outliers(series: CfrSeries, cfg: PreprocessConfig) -> CfrSeries:
    if len(series) == 0:
        raise EmptySeriesError("empty series")
    keep = outlier_mask(series.rssi_db, cfg)
    if not keep.any():
        raise EmptySeriesError("all snapshots rejected as outliers")
    return series.subset(keep)


def preprocess_series(series: CfrSeries, cfg: PreprocessConfig, chunk: int = 4096) -> CfrSeries:
    if cfg.outlier_removal:
        series = remove_outliers(series, cfg)
    k = series.subcarrier_indices
    out = np.empty(series.values.shape, dtype=complex)
    for start in range(0, len(series), chunk):
        out[start:start + chunk] = preprocess_values(series.values[start:start + chunk], k, cfg)
    return series.with_values(out)
