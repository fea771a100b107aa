"""Windowed, oversampled IDFT from CFR to delay-domain CIR.

Occupied subcarriers are Blackman-weighted, placed by index on a
``kappa * N_fft`` ring (zero padding) and inverse transformed with the
``1/M`` normalization of :func:`numpy.fft.ifft`, so that

    sum |h|^2 = (1 / M) * sum |w(k) H(k)|^2 .

Delay bin ``n`` sits at ``n / (M * delta_f)``; the ring wraps at
``1 / delta_f``.
"""

from __future__ import annotations

import os

import numpy as np
from scipy import fft as sfft

from .config import RadioParams
from .errors import ShapeError
from .series import CfrSeries, CfrSnapshot, Cir, CirSeries


def fft_workers() -> int:
    """Thread count for transforms; ``WIFIRADAR_THREADS`` overrides."""
    env = os.environ.get("WIFIRADAR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def window_coefficients(n: int) -> np.ndarray:
    """Symmetric three-term Blackman window (0.42, 0.5, 0.08)."""
    if n < 2:
        raise ValueError("window length must be >= 2")
    x = 2 * np.pi * np.arange(n) / (n - 1)
    return 0.42 - 0.5 * np.cos(x) + 0.08 * np.cos(2 * x)


def delay_resolution(radio: RadioParams) -> float:
    """Intrinsic delay resolution 1/B."""
    if radio.bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return 1.0 / radio.bandwidth_hz


def ring_delay_grid(radio: RadioParams) -> np.ndarray:
    return np.arange(radio.n_ring) * radio.delay_step_s


def window_delay_grid(radio: RadioParams, window_s) -> np.ndarray:
    """Grid bins covering ``[lo, hi]`` (negative delays allowed)."""
    lo, hi = window_s
    step = radio.delay_step_s
    n0, n1 = int(np.floor(lo / step)), int(np.ceil(hi / step))
    return np.arange(n0, n1 + 1) * step


def _check_indices(indices, radio: RadioParams):
    if not np.array_equal(np.asarray(indices), radio.indices):
        raise ShapeError("snapshot subcarrier grid does not match the radio parameters")


def windowed_spectrum(values, radio: RadioParams, window: bool = True) -> np.ndarray:
    values = np.asarray(values)
    if values.shape[-1] != radio.indices.size:
        raise ShapeError("CFR length does not match the radio's subcarrier count")
    if not window:
        return values.astype(complex)
    return values * window_coefficients(radio.indices.size)


def ring_transform(spectrum, radio: RadioParams) -> np.ndarray:
    """Zero-pad an occupied-bin spectrum to the ring and inverse transform."""
    spectrum = np.asarray(spectrum)
    padded = np.zeros(spectrum.shape[:-1] + (radio.n_ring,), dtype=complex)
    padded[..., radio.indices % radio.n_ring] = spectrum
    return sfft.ifft(padded, axis=-1, workers=fft_workers())


def evaluate_delays(spectrum, radio: RadioParams, delays_s) -> np.ndarray:
    """Direct evaluation of the ring CIR at arbitrary delays.

    Matches :func:`ring_transform` exactly on grid points and interpolates
    the band-limited CIR between them.
    """
    phase = np.exp(2j * np.pi * np.outer(radio.frequencies_hz, np.asarray(delays_s)))
    return (np.asarray(spectrum) @ phase) / radio.n_ring


def build_cir(s: CfrSnapshot, radio: RadioParams | None = None, window: bool = True) -> Cir:
    """Full-ring CIR of one (preprocessed) snapshot."""
    radio = radio or RadioParams()
    _check_indices(s.subcarrier_indices, radio)
    h = ring_transform(windowed_spectrum(s.values, radio, window), radio)
    return Cir(s.time_s, ring_delay_grid(radio), h)


def build_cir_series(series: CfrSeries, delay_window_s=None, window: bool = True,
                     chunk: int = 512) -> CirSeries:
    """Uncalibrated CIRs, optionally restricted to a delay window."""
    radio = series.radio
    _check_indices(series.subcarrier_indices, radio)
    if delay_window_s is None:
        grid = ring_delay_grid(radio)
    else:
        grid = window_delay_grid(radio, delay_window_s)
    out = np.empty((len(series), grid.size), dtype=complex)
    for start in range(0, len(series), chunk):
        spec = windowed_spectrum(series.values[start:start + chunk], radio, window)
        if delay_window_s is None:
            out[start:start + chunk] = ring_transform(spec, radio)
        else:
            out[start:start + chunk] = evaluate_delays(spec, radio, grid)
    return CirSeries(radio, series.times_s, grid, out, "raw")
