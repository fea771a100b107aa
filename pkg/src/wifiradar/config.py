"""Radio, preprocessing, calibration and STFT parameter sets.

Defaults reproduce the 802.11ax 160 MHz setup used throughout the package
(5.57 GHz carrier, 2025 subcarriers at 78.125 kHz, 2048-point base IDFT with
32x delay oversampling; 256/224 Hann STFT with 8x Doppler zero padding).

All configs are plain dataclasses; :func:`to_dict` / :func:`from_dict` give a
strict JSON mapping (unknown keys are rejected).
"""

from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


def _default_indices() -> tuple[int, ...]:
    return tuple(range(-1012, 1013))


def _default_notches() -> tuple[int, ...]:
    return tuple(range(-771, -764)) + tuple(range(765, 772))


@dataclass(frozen=True)
class RadioParams:
    carrier_frequency_hz: float = 5.57e9
    bandwidth_hz: float = 160e6
    subcarrier_spacing_hz: float = 78_125.0
    subcarrier_indices: tuple[int, ...] = field(default_factory=_default_indices)
    speed_of_light_m_s: float = SPEED_OF_LIGHT
    oversampling_factor: int = 32
    fft_points_base: int = 2048

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0 or self.bandwidth_hz <= 0:
            raise ConfigError("carrier frequency and bandwidth must be positive")
        if self.subcarrier_spacing_hz <= 0:
            raise ConfigError("subcarrier spacing must be positive")
        if int(self.oversampling_factor) != self.oversampling_factor or self.oversampling_factor < 1:
            raise ConfigError("oversampling_factor must be an integer >= 1")
        idx = np.asarray(self.subcarrier_indices)
        if idx.ndim != 1 or idx.size < 2 or np.any(np.diff(idx) <= 0):
            raise ConfigError("subcarrier_indices must be strictly increasing")
        half = self.fft_points_base // 2
        if idx[0] < -half or idx[-1] >= half:
            raise ConfigError(
                f"subcarrier indices exceed the {self.fft_points_base}-point base grid"
            )

    @property
    def wavelength_m(self) -> float:
        return self.speed_of_light_m_s / self.carrier_frequency_hz

    @property
    def indices(self) -> np.ndarray:
        return np.asarray(self.subcarrier_indices, dtype=np.int64)

    @property
    def frequencies_hz(self) -> np.ndarray:
        """Baseband subcarrier frequencies k * delta_f."""
        return self.indices * self.subcarrier_spacing_hz

    @property
    def n_ring(self) -> int:
        """Length of the oversampled delay ring, kappa * N_fft."""
        return int(self.oversampling_factor) * self.fft_points_base

    @property
    def delay_step_s(self) -> float:
        return 1.0 / (self.n_ring * self.subcarrier_spacing_hz)

    @property
    def ring_period_s(self) -> float:
        return 1.0 / self.subcarrier_spacing_hz


@dataclass(frozen=True)
class PreprocessConfig:
    outlier_removal: bool = True
    dc_interpolation: bool = True
    notch_repair: bool = True
    edge_equalization: bool = True
    rms_normalization: bool = True

    rssi_drop_threshold_db: float = 10.0
    rssi_median_window: int = 101
    dc_index_range: tuple[int, int] = (-11, 11)
    notch_indices: tuple[int, ...] = field(default_factory=_default_notches)
    attenuation_breakpoints: tuple[int, int] = (680, 704)
    attenuation_floor: float = 0.6
    rms_reference_index_bound: int = 680

    def __post_init__(self):
        if self.rssi_drop_threshold_db <= 0:
            raise ConfigError("rssi_drop_threshold_db must be positive")
        if self.rssi_median_window < 1:
            raise ConfigError("rssi_median_window must be >= 1")
        lo, hi = self.dc_index_range
        if lo > hi:
            raise ConfigError("dc_index_range must be (low, high) with low <= high")
        k0, k1 = self.attenuation_breakpoints
        if not 0 <= k0 < k1:
            raise ConfigError("attenuation breakpoints must satisfy 0 <= k0 < k1")
        if not 0 < self.attenuation_floor <= 1:
            raise ConfigError("attenuation_floor must lie in (0, 1]")
        if self.rms_reference_index_bound < 0:
            raise ConfigError("rms_reference_index_bound must be non-negative")

    @classmethod
    def disabled(cls, **overrides) -> "PreprocessConfig":
        """Every step switched off; keyword overrides re-enable selectively."""
        flags = dict(
            outlier_removal=False,
            dc_interpolation=False,
            notch_repair=False,
            edge_equalization=False,
            rms_normalization=False,
        )
        flags.update(overrides)
        return cls(**flags)


@dataclass(frozen=True)
class CalibrationConfig:
    reference_distance_m: float = 1.0
    friis_normalization: bool = True
    # Refine the LoS peak to the continuous maximum and shift by an exact
    # frequency-domain phase ramp. False gives integer-bin circular shifts.
    subbin: bool = True
    dominance_warning_db: float = 3.0
    speed_of_light_m_s: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not self.reference_distance_m > 0:
            raise ConfigError("reference_distance_m must be positive")

    @property
    def reference_delay_s(self) -> float:
        return self.reference_distance_m / self.speed_of_light_m_s

    def snapped_reference_delay_s(self, radio: RadioParams) -> float:
        return round(self.reference_delay_s / radio.delay_step_s) * radio.delay_step_s


@dataclass(frozen=True)
class StftParams:
    segment_length: int = 256
    overlap: int = 224
    doppler_interp_rate: int = 8
    window_kind: str = "hann"
    mean_removal: bool = True

    def __post_init__(self):
        if self.segment_length < 2:
            raise ConfigError("segment_length must be >= 2")
        if not 0 <= self.overlap < self.segment_length:
            raise ConfigError("overlap must satisfy 0 <= overlap < segment_length")
        if self.doppler_interp_rate < 1:
            raise ConfigError("doppler_interp_rate must be >= 1")
        if self.window_kind not in ("hann", "rect"):
            raise ConfigError(f"unsupported window_kind {self.window_kind!r}")

    @property
    def hop(self) -> int:
        return self.segment_length - self.overlap

    @property
    def nfft(self) -> int:
        return self.segment_length * self.doppler_interp_rate

    def window(self) -> np.ndarray:
        n = self.segment_length
        if self.window_kind == "rect":
            return np.ones(n)
        # periodic Hann
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


# ---------------------------------------------------------------------------
# dict <-> dataclass
# ---------------------------------------------------------------------------

def to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError("non-finite values are not representable in JSON configs")
    return obj


def from_dict(cls, data, path: str | None = None):
    path = path or cls.__name__
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    kwargs = {k: _coerce(hints[k], v, f"{path}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        options = [a for a in args if a is not type(None)]
        errors = []
        for option in options:
            try:
                return _coerce(option, value, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError("; ".join(errors))
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{path}: expected {len(args)} items, got {len(value)}")
        return tuple(_coerce(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return [_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is complex:
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return complex(value)
        raise ConfigError(f"{path}: expected [re, im]")
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    return value
