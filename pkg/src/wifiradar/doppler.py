"""Uniform resampling, STFT delay-Doppler maps, peak tracks, and the
magnitude/PCA baseline.

Sign convention: a residual CIR evolving as ``exp(+j 2 pi nu t)`` appears at
``+nu``; with the bistatic Doppler relation ``nu = -d_dot / lambda`` positive
Doppler therefore means a shrinking bistatic range (approaching target).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy import fft as sfft

from .cir_builder import fft_workers
from .config import StftParams
from .errors import DataError, DegenerateInputError, StateError
from .series import CfrSeries, CirSeries


class IntervalStats(NamedTuple):
    median_s: float
    mad_s: float
    min_s: float
    max_s: float


def interval_stats(times) -> IntervalStats:
    """Median, median absolute deviation, min and max of consecutive intervals."""
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise DataError("need at least two times")
    d = np.diff(t)
    med = float(np.median(d))
    return IntervalStats(med, float(np.median(np.abs(d - med))), float(d.min()), float(d.max()))


@dataclass(frozen=True)
class ResampleGrid:
    start_s: float
    step_s: float
    count: int

    def __post_init__(self):
        if not self.step_s > 0 or self.count < 2:
            raise DataError("resample grid needs step > 0 and at least two points")

    @property
    def times_s(self) -> np.ndarray:
        return self.start_s + self.step_s * np.arange(self.count)


def _neighbour_plan(filled: np.ndarray, count: int):
    pos = np.flatnonzero(filled)
    missing = np.flatnonzero(~filled)
    j = np.searchsorted(pos, missing)
    left = pos[np.clip(j - 1, 0, pos.size - 1)]
    right = pos[np.clip(j, 0, pos.size - 1)]
    span = (right - left).astype(float)
    w = np.divide(missing - left, span, out=np.zeros(missing.size), where=span > 0)
    return missing, left, right, w


def resample_values(times, values, step_s: float, mode: str = "complex"):
    """Nearest-grid assignment plus gap interpolation along axis 0.

    Each observation claims its nearest grid point (earlier observations
    win conflicts); unclaimed points are filled by linear interpolation of
    magnitude and of unwrapped phase (``mode="complex"``) or of the value
    itself (``mode="real"``).  Returns (grid, resampled, claimed_mask).
    """
    t = np.asarray(times, dtype=float)
    values = np.asarray(values)
    if t.size < 2:
        raise DataError("need at least two snapshots to resample")
    idx = np.rint((t - t[0]) / step_s).astype(np.int64)
    grid = ResampleGrid(float(t[0]), float(step_s), int(idx.max()) + 1)
    first_idx, first_obs = np.unique(idx, return_index=True)
    out = np.zeros((grid.count,) + values.shape[1:], dtype=values.dtype)
    out[first_idx] = values[first_obs]
    filled = np.zeros(grid.count, dtype=bool)
    filled[first_idx] = True
    if filled.all():
        return grid, out, filled
    if filled.sum() < 2:
        warnings.warn("fewer than two claimed grid points; holding nearest value", stacklevel=2)
        out[:] = out[first_idx[0]]
        return grid, out, filled
    missing, left, right, w = _neighbour_plan(filled, grid.count)
    wshape = (-1,) + (1,) * (values.ndim - 1)
    w = w.reshape(wshape)
    if mode == "real":
        out[missing] = (1 - w) * out[left] + w * out[right]
        return grid, out, filled
    pos = np.flatnonzero(filled)
    phase = np.zeros(out.shape)
    phase[pos] = np.unwrap(np.angle(out[pos]), axis=0)
    mag = np.abs(out)
    m = (1 - w) * mag[left] + w * mag[right]
    ph = (1 - w) * phase[left] + w * phase[right]
    out[missing] = m * np.exp(1j * ph)
    return grid, out, filled


def uniform_resample(series: CirSeries, step_s: float | None = None) -> tuple[CirSeries, ResampleGrid]:
    """Resample a calibrated or residual CIR series onto a uniform time grid.

    The default step is the median inter-snapshot interval.
    """
    if series.calibration_state not in ("calibrated", "residual"):
        raise StateError("resampling needs calibrated or residual CIRs")
    if step_s is None:
        step_s = interval_stats(series.times_s).median_s
    grid, values, _ = resample_values(series.times_s, series.values, step_s, "complex")
    out = CirSeries(series.radio, grid.times_s, series.delay_grid_s, values,
                    series.calibration_state)
    return out, grid


# ---------------------------------------------------------------------------
# STFT
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayDopplerFrame:
    center_time_s: float
    delay_grid_s: np.ndarray
    doppler_grid_hz: np.ndarray
    values: np.ndarray  # (n_delay, n_doppler)


def doppler_grid(p: StftParams, step_s: float) -> np.ndarray:
    return sfft.fftshift(sfft.fftfreq(p.nfft, step_s))


def doppler_resolution(p: StftParams, step_s: float) -> float:
    """Resolution set by the segment duration, 1 / (L * dt)."""
    return 1.0 / (p.segment_length * step_s)


def _uniform_step(times) -> float:
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise DataError("need at least two samples")
    d = np.diff(t)
    step = float(np.median(d))
    if np.max(np.abs(d - step)) > 1e-6 * step:
        raise DataError("series is not uniformly sampled; resample first")
    return step


def _frame_starts(n: int, p: StftParams) -> range:
    if n < p.segment_length:
        raise DataError(f"series of {n} samples is shorter than one STFT segment")
    return range(0, n - p.segment_length + 1, p.hop)


def iter_delay_doppler(series: CirSeries, p: StftParams,
                       delay_window_s=None) -> Iterator[DelayDopplerFrame]:
    """Per-delay-bin STFT of a uniformly sampled CIR series, one frame per segment."""
    step = _uniform_step(series.times_s)
    starts = _frame_starts(len(series), p)
    grid = series.delay_grid_s
    cols = slice(None)
    if delay_window_s is not None:
        lo, hi = delay_window_s
        sel = np.flatnonzero((grid >= lo) & (grid <= hi))
        if sel.size == 0:
            raise DataError("delay window selects no bins")
        cols = slice(sel[0], sel[-1] + 1)
    x = series.values[:, cols]
    grid = grid[cols]
    win = p.window()[:, None]
    nu = doppler_grid(p, step)
    L = p.segment_length
    for start in starts:
        seg = x[start:start + L]
        if p.mean_removal:
            seg = seg - seg.mean(axis=0)
        s = sfft.fftshift(sfft.fft(seg * win, n=p.nfft, axis=0, workers=fft_workers()), axes=0)
        yield DelayDopplerFrame(float(series.times_s[0] + (start + L / 2) * step), grid, nu,
                                np.ascontiguousarray(s.T))


def stft_delay_doppler(series: CirSeries, p: StftParams, delay_window_s=None) -> list[DelayDopplerFrame]:
    return list(iter_delay_doppler(series, p, delay_window_s))


@dataclass(frozen=True)
class PeakEstimate:
    center_time_s: float
    bistatic_delay_s: float
    doppler_hz: float
    bistatic_range_rate_m_s: float
    effective_radial_velocity_m_s: float | None
    power_db: float


def peak_delay_doppler(frame: DelayDopplerFrame, wavelength_m: float = 299_792_458.0 / 5.57e9,
                       tx_rx_separation_m: float | None = None,
                       speed_of_light_m_s: float = 299_792_458.0) -> PeakEstimate:
    """Argmax of |s| over (delay, Doppler).

    Ties go to the smaller delay, then the smaller |nu|.  The monostatic
    effective velocity ``-nu lambda / 2`` is reported only when the Tx-Rx
    separation is below a fifth of the bistatic range (or unknown).
    """
    power = np.abs(frame.values) ** 2
    top = power.max()
    if not top > 0:
        raise DegenerateInputError("all-zero delay-Doppler frame")
    cand = np.argwhere(power == top)
    order = np.lexsort((np.abs(frame.doppler_grid_hz[cand[:, 1]]), cand[:, 0]))
    i, j = cand[order[0]]
    tau = float(frame.delay_grid_s[i])
    nu = float(frame.doppler_grid_hz[j])
    v_eff = None
    if tx_rx_separation_m is None or tx_rx_separation_m < speed_of_light_m_s * tau / 5:
        v_eff = -nu * wavelength_m / 2
    return PeakEstimate(frame.center_time_s, tau, nu, -nu * wavelength_m, v_eff,
                        float(10 * np.log10(top)))


@dataclass(frozen=True)
class DopplerTimeMap:
    times_s: np.ndarray
    doppler_grid_hz: np.ndarray
    power: np.ndarray  # (n_doppler, n_time), linear

    def power_db(self, floor_db: float = -300.0) -> np.ndarray:
        """10 log10(power / max), clipped at ``floor_db``."""
        top = self.power.max()
        if not top > 0:
            return np.full(self.power.shape, floor_db)
        with np.errstate(divide="ignore"):
            return np.maximum(10 * np.log10(self.power / top), floor_db)


def incoherent_doppler_time(frames) -> DopplerTimeMap:
    """Sum |s|^2 over delay for every frame."""
    frames = list(frames)
    if not frames:
        raise DataError("no frames")
    cols = [np.sum(np.abs(f.values) ** 2, axis=0) for f in frames]
    return DopplerTimeMap(np.array([f.center_time_s for f in frames]),
                          frames[0].doppler_grid_hz, np.stack(cols, axis=1))


# ---------------------------------------------------------------------------
# magnitude / PCA baseline
# ---------------------------------------------------------------------------

def principal_components(magnitudes) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigen-decomposition of the time-centred magnitude covariance.

    Returns (eigenvalues desc, loadings (K, K) by column, numerical rank).
    Each loading's largest-magnitude entry is made positive.
    """
    m = np.asarray(magnitudes, dtype=float)
    centred = m - m.mean(axis=0)
    cov = centred.T @ centred / max(m.shape[0] - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    big = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[big, np.arange(vecs.shape[1])])
    tol = max(vals[0], 0) * max(m.shape) * np.finfo(float).eps
    rank = int(np.sum(vals > tol))
    return vals, vecs, rank


def baseline_signal(cfr: CfrSeries, mode: str, index: int) -> np.ndarray:
    """Real time series: |H(k)| at subcarrier ``index``, or PC score ``index`` (1-based)."""
    mag = np.abs(np.asarray(cfr.values))
    if mode == "subcarrier":
        hit = np.flatnonzero(cfr.subcarrier_indices == index)
        if hit.size == 0:
            raise ValueError(f"subcarrier {index} not in the grid")
        return mag[:, hit[0]]
    if mode == "pc":
        _, vecs, rank = principal_components(mag)
        if not 1 <= index <= rank:
            raise ValueError(f"component {index} exceeds the data rank {rank}")
        return (mag - mag.mean(axis=0)) @ vecs[:, index - 1]
    raise ValueError(f"unknown baseline mode {mode!r}")


@dataclass(frozen=True)
class TimeFrequencyMap:
    times_s: np.ndarray
    doppler_grid_hz: np.ndarray
    power: np.ndarray  # (n_doppler, n_time)

    def power_db(self, floor_db: float = -300.0) -> np.ndarray:
        return DopplerTimeMap(self.times_s, self.doppler_grid_hz, self.power).power_db(floor_db)


def stft_real(x, p: StftParams, step_s: float, t0: float = 0.0) -> TimeFrequencyMap:
    """Two-sided STFT power of a real series, built from the one-sided
    transform so that power(+nu) == power(-nu) bit for bit."""
    x = np.asarray(x, dtype=float)
    starts = _frame_starts(x.size, p)
    win = p.window()
    L, nfft = p.segment_length, p.nfft
    cols, times = [], []
    for start in starts:
        seg = x[start:start + L]
        if p.mean_removal:
            seg = seg - seg.mean()
        half = sfft.rfft(seg * win, n=nfft)
        pw = np.abs(half) ** 2
        # fftshift order: -nfft/2 .. nfft/2 - 1
        neg = pw[1:nfft // 2 + (nfft % 2)][::-1]
        full = np.concatenate([[pw[nfft // 2]] if nfft % 2 == 0 else [], neg,
                               pw[:nfft // 2 + (nfft % 2)]])
        cols.append(full)
        times.append(t0 + (start + L / 2) * step_s)
    return TimeFrequencyMap(np.array(times), doppler_grid(p, step_s), np.stack(cols, axis=1))


def baseline_magnitude_stft(cfr: CfrSeries, p: StftParams, mode: str = "subcarrier",
                            index: int = 100, step_s: float | None = None) -> TimeFrequencyMap:
    """Conventional magnitude-based time-frequency map for comparison."""
    x = baseline_signal(cfr, mode, index)
    if step_s is None:
        step_s = interval_stats(cfr.times_s).median_s
    grid, xu, _ = resample_values(cfr.times_s, x, step_s, "real")
    return stft_real(xu, p, step_s, grid.start_s)
