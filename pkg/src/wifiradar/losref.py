"""Line-of-sight referencing: delay calibration and phase alignment.

For every snapshot the strongest CIR component (assumed to be the LoS path)
is located, shifted to the reference delay ``d_ref / c`` and rotated to zero
phase; optionally the magnitude is then pinned to the free-space gain
``lambda / (4 pi d_ref)``.

With ``CalibrationConfig.subbin`` (default) the peak is refined from the
oversampled grid maximum to the continuous maximum of ``|h(tau)|`` and the
shift is applied as an exact phase ramp on the spectrum.  Both steps commute
with a delay shift of the input, so the calibrated CIR does not depend on
the receiver's delay/phase offsets at all, not merely to within a bin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .cir_builder import (evaluate_delays, fft_workers, ring_transform, window_delay_grid,
                          windowed_spectrum, _check_indices)
from .config import CalibrationConfig, RadioParams
from .errors import ConfigError, DegenerateInputError, ShapeError
from .series import CfrSeries, Cir, CirSeries


class LosDominanceWarning(UserWarning):
    """The strongest CIR peak is not clearly dominant; calibration may lock onto the wrong path."""


@dataclass(frozen=True)
class LosPeak:
    peak_delay_s: float
    peak_phase_rad: float
    peak_magnitude: float
    refined_delay_s: float
    refined_phase_rad: float
    refined_magnitude: float
    second_peak_db: float


def _wrap_phase(phi):
    phi = np.angle(np.exp(1j * np.asarray(phi)))
    return np.where(phi <= -np.pi, np.pi, phi)


def _signed_delay(tau, radio: RadioParams):
    period = radio.ring_period_s
    return (np.asarray(tau) + period / 2) % period - period / 2


def refine_peak(spectrum, radio: RadioParams, tau0, half_width_s=None, max_iter=40):
    """Continuous maximum of |h(tau)| near grid estimates ``tau0``.

    Safeguarded Newton iteration on d|h|^2/dtau = 2 Re(conj(h) h') inside
    ``tau0 +- half_width_s``; vectorized over the leading axis.
    Returns (tau_star, h(tau_star)).
    """
    spectrum = np.atleast_2d(spectrum)
    tau0 = np.atleast_1d(np.asarray(tau0, dtype=float))
    hw = radio.delay_step_s if half_width_s is None else half_width_s
    w = 2 * np.pi * radio.frequencies_hz
    # measure delays from tau0 so the iterate stays small and precise
    x0 = spectrum * np.exp(1j * np.outer(tau0, w))
    jw = 1j * w
    m = radio.n_ring

    def derivs(x):
        e = x0 * np.exp(1j * np.outer(x, w))
        h = e.sum(axis=1) / m
        e = e * jw
        h1 = e.sum(axis=1) / m
        h2 = (e * jw).sum(axis=1) / m
        return h, h1, h2

    lo = np.full(tau0.shape, -hw)
    hi = np.full(tau0.shape, hw)
    x = np.zeros(tau0.shape)
    active = np.ones(tau0.shape, dtype=bool)
    for _ in range(max_iter):
        h, h1, h2 = derivs(x)
        g = np.real(np.conj(h) * h1)
        gp = np.abs(h1) ** 2 + np.real(np.conj(h) * h2)
        lo = np.where(g > 0, np.maximum(lo, x), lo)
        hi = np.where(g < 0, np.minimum(hi, x), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - g / gp
        bad = ~(gp < 0) | ~np.isfinite(x_new) | (x_new < lo) | (x_new > hi)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        step = np.abs(x_new - x)
        x = np.where(active, x_new, x)
        active &= step > 1e-10 * radio.delay_step_s
        if not active.any():
            break
    h, _, _ = derivs(x)
    return tau0 + x, h


def _coarse_ring(spectrum, radio: RadioParams, factor: int = 4) -> np.ndarray:
    n = min(radio.n_ring, factor * radio.fft_points_base)
    padded = np.zeros(spectrum.shape[:-1] + (n,), dtype=complex)
    padded[..., radio.indices % n] = spectrum
    return sfft.ifft(padded, axis=-1, workers=fft_workers())


def _second_peak_db(mag: np.ndarray) -> np.ndarray:
    """Largest non-global local maximum relative to the global one, in dB (rows)."""
    mag = np.atleast_2d(mag)
    left = np.roll(mag, 1, axis=-1)
    right = np.roll(mag, -1, axis=-1)
    is_max = (mag > left) & (mag >= right)
    top = mag.max(axis=-1, keepdims=True)
    cand = np.where(is_max & (mag < top), mag, 0.0)
    second = cand.max(axis=-1)
    with np.errstate(divide="ignore"):
        return 20 * np.log10(second / top[:, 0])


def detect_los_peak(c: Cir, radio: RadioParams | None = None) -> LosPeak:
    """Strongest bin of ``c`` (ties to smaller delay).

    When ``radio`` is given and ``c`` spans the full ring, the refined
    (continuous) peak is also computed; otherwise refined == grid values.
    """
    values = np.asarray(c.values)
    mag = np.abs(values)
    if not np.any(mag > 0):
        raise DegenerateInputError("all-zero CIR")
    i = int(np.argmax(mag))
    tau, theta, peak = float(c.delay_grid_s[i]), float(_wrap_phase(np.angle(values[i]))), float(mag[i])
    r_tau, r_theta, r_mag = tau, theta, peak
    if radio is not None and values.size == radio.n_ring:
        spectrum = sfft.fft(values, workers=fft_workers())[radio.indices % radio.n_ring]
        t_star, h_star = refine_peak(spectrum, radio, [_signed_delay(tau, radio)])
        r_tau = float(t_star[0] % radio.ring_period_s)
        r_theta = float(_wrap_phase(np.angle(h_star[0])))
        r_mag = float(abs(h_star[0]))
    second = float(_second_peak_db(mag)[0])
    return LosPeak(tau, theta, peak, r_tau, r_theta, r_mag, second)


def _warn_dominance(second_db, cfg: CalibrationConfig):
    weak = np.asarray(second_db) > -cfg.dominance_warning_db
    if np.any(weak):
        warnings.warn(
            f"{int(np.sum(weak))} snapshot(s) with top-2 CIR peak ratio below "
            f"{cfg.dominance_warning_db} dB; LoS dominance assumption may not hold",
            LosDominanceWarning, stacklevel=3,
        )
    return weak


def calibrate(c: Cir, cfg: CalibrationConfig, radio: RadioParams | None = None) -> Cir:
    """Shift the strongest component to the (grid-snapped) reference delay and zero its phase."""
    radio = radio or RadioParams()
    values = np.asarray(c.values)
    if cfg.subbin and values.size != radio.n_ring:
        raise ShapeError("sub-bin calibration needs a full-ring CIR")
    peak = detect_los_peak(c, radio if cfg.subbin else None)
    _warn_dominance(peak.second_peak_db, cfg)
    tau_ref = cfg.snapped_reference_delay_s(radio)
    if cfg.subbin:
        shift = _signed_delay(tau_ref - peak.refined_delay_s, radio)
        m = sfft.fftfreq(radio.n_ring, 1.0 / radio.n_ring)
        spec = sfft.fft(values, workers=fft_workers())
        spec *= np.exp(-1j * (2 * np.pi * m * radio.subcarrier_spacing_hz * shift
                              + peak.refined_phase_rad))
        out = sfft.ifft(spec, workers=fft_workers())
    else:
        bins = int(round((tau_ref - peak.peak_delay_s) / radio.delay_step_s))
        out = np.roll(values, bins) * np.exp(-1j * peak.peak_phase_rad)
    return Cir(c.time_s, c.delay_grid_s, out)


def normalize_to_friis(c: Cir, cfg: CalibrationConfig, radio: RadioParams | None = None) -> Cir:
    """Scale so |h(tau_ref)| equals the free-space gain at d_ref."""
    if not cfg.friis_normalization:
        return c
    radio = radio or RadioParams()
    tau_ref = cfg.snapped_reference_delay_s(radio)
    i = int(np.argmin(np.abs(_signed_delay(c.delay_grid_s - tau_ref, radio))))
    mag = abs(c.values[i])
    if mag == 0:
        raise DegenerateInputError("zero magnitude at the reference delay")
    target = radio.wavelength_m / (4 * math.pi * cfg.reference_distance_m)
    return Cir(c.time_s, c.delay_grid_s, np.asarray(c.values) * (target / mag))


@dataclass
class CalibrationResult:
    series: CirSeries
    peak_delay_s: np.ndarray
    peak_phase_rad: np.ndarray
    second_peak_db: np.ndarray
    dominance_flags: np.ndarray

    @property
    def dominance_warning_count(self) -> int:
        return int(np.sum(self.dominance_flags))


def calibrate_series(cfr: CfrSeries, cfg: CalibrationConfig,
                     delay_window_s=(-20e-9, 80e-9), window: bool = True,
                     chunk: int = 256) -> CalibrationResult:
    """build_cir -> calibrate -> normalize_to_friis for a whole series.

    Output CIRs are evaluated only on the bins of ``delay_window_s``, which
    must contain the reference delay.
    """
    radio = cfr.radio
    _check_indices(cfr.subcarrier_indices, radio)
    grid = window_delay_grid(radio, delay_window_s)
    tau_ref = cfg.snapped_reference_delay_s(radio)
    i_ref = int(np.argmin(np.abs(grid - tau_ref)))
    if not grid[0] <= tau_ref <= grid[-1]:
        raise ConfigError("delay window must contain the reference delay")
    grid_bins = np.rint(grid / radio.delay_step_s).astype(np.int64)
    friis = radio.wavelength_m / (4 * math.pi * cfg.reference_distance_m)
    w = 2 * np.pi * radio.frequencies_hz

    n = len(cfr)
    out = np.empty((n, grid.size), dtype=complex)
    peak_tau = np.empty(n)
    peak_phase = np.empty(n)
    second = np.empty(n)
    for start in range(0, n, chunk):
        sl = slice(start, start + chunk)
        spec = windowed_spectrum(np.asarray(cfr.values[sl], dtype=complex), radio, window)
        if cfg.subbin:
            # coarse ring only seeds the continuous refinement
            coarse = _coarse_ring(spec, radio)
            mag = np.abs(coarse)
            if np.any(mag.max(axis=1) == 0):
                raise DegenerateInputError("all-zero CIR in series")
            step = radio.ring_period_s / coarse.shape[1]
            tau0 = _signed_delay(np.argmax(mag, axis=1) * step, radio)
            second[sl] = _second_peak_db(mag)
            tau_star, h_star = refine_peak(spec, radio, tau0, half_width_s=step)
            theta = np.angle(h_star)
            ramp = np.exp(-1j * (np.outer(tau_ref - tau_star, w) + theta[:, None]))
            vals = evaluate_delays(spec * ramp, radio, grid)
        else:
            ring = ring_transform(spec, radio)
            mag = np.abs(ring)
            if np.any(mag.max(axis=1) == 0):
                raise DegenerateInputError("all-zero CIR in series")
            i0 = np.argmax(mag, axis=1)
            second[sl] = _second_peak_db(mag)
            tau_star = _signed_delay(i0 * radio.delay_step_s, radio)
            theta = np.angle(ring[np.arange(ring.shape[0]), i0])
            shift = np.rint((tau_ref - tau_star) / radio.delay_step_s).astype(np.int64)
            idx = (grid_bins[None, :] - shift[:, None]) % radio.n_ring
            vals = np.take_along_axis(ring, idx, axis=1) * np.exp(-1j * theta)[:, None]
        if cfg.friis_normalization:
            ref_mag = np.abs(vals[:, i_ref])
            if np.any(ref_mag == 0):
                raise DegenerateInputError("zero magnitude at the reference delay")
            vals *= (friis / ref_mag)[:, None]
        out[sl] = vals
        peak_tau[sl] = tau_star
        peak_phase[sl] = _wrap_phase(theta)
    flags = _warn_dominance(second, cfg)
    series = CirSeries(radio, cfr.times_s, grid, out, "calibrated")
    return CalibrationResult(series, peak_tau, peak_phase, second, flags)
