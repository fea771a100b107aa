"""End-to-end processing: CFR -> preprocess -> CIR -> LoS reference ->
clutter -> resample -> delay-Doppler products.

:func:`run_pipeline` accepts an in-memory :class:`CfrSeries` or a
:class:`~wifiradar.formats.CsirReader` and streams the CFR through
preprocessing and calibration in chunks, so raw CFRs are never held in
full.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .clutter import ClutterProfile, remove_clutter
from .config import (CalibrationConfig, PreprocessConfig, RadioParams, StftParams,
                     from_dict, to_dict)
from .doppler import (DelayDopplerFrame, DopplerTimeMap, PeakEstimate, iter_delay_doppler,
                      peak_delay_doppler, uniform_resample)
from .errors import ConfigError, EmptySeriesError, WifiRadarError
from .losref import calibrate_series
from .preprocess import outlier_mask, preprocess_values
from .scene_sim import SceneConfig
from .series import CfrSeries, CirSeries


@dataclass(frozen=True)
class IoConfig:
    input_path: str | None = None
    output_dir: str = "out"
    csv_mirror: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    radio: RadioParams = field(default_factory=RadioParams)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    stft: StftParams = field(default_factory=StftParams)
    scene: SceneConfig | None = None
    io: IoConfig = field(default_factory=IoConfig)
    seed: int = 0
    # bins kept after calibration, and the subset fed to the STFT
    cir_delay_window_s: tuple[float, float] = (-20e-9, 80e-9)
    doppler_delay_window_s: tuple[float, float] = (0.0, 60e-9)
    phase_tau_s: float = 20e-9
    # None: whole-run clutter mean; int: sliding mean over that many snapshots
    clutter_window: int | None = None
    resample_step_s: float | None = None
    export_frames: int = 8
    # frames whose peak is this far below a full-scale LoS tone count as empty
    detection_floor_db: float = -100.0
    baseline_mode: str = "subcarrier"
    baseline_index: int = 100
    chunk: int = 256

    def __post_init__(self):
        if self.baseline_mode not in ("subcarrier", "pc"):
            raise ConfigError("baseline_mode must be 'subcarrier' or 'pc'")
        if self.export_frames < 0 or self.chunk < 1:
            raise ConfigError("export_frames must be >= 0 and chunk >= 1")
        for name in ("cir_delay_window_s", "doppler_delay_window_s"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"{name} must be (low, high) with low < high")

    def to_json(self) -> str:
        return json.dumps(to_dict(self), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return from_dict(PipelineConfig, data)


@contextmanager
def stage(name: str):
    """Re-raise package errors with the stage name prefixed."""
    try:
        yield
    except WifiRadarError as exc:
        if getattr(exc, "stage", None):
            raise
        new = type(exc)(f"[{name}] {exc}")
        new.stage = name
        raise new from exc


@dataclass
class PipelineResult:
    calibrated: CirSeries
    residual: CirSeries
    clutter: ClutterProfile
    resampled: CirSeries
    peak_delay_s: np.ndarray
    peaks: list[PeakEstimate]
    detected: np.ndarray
    doppler_time: DopplerTimeMap
    exported_frames: list[DelayDopplerFrame]
    kept_snapshots: int
    dropped_snapshots: int
    dominance_warning_count: int
    warnings: list[str]

    def phase_trace(self, tau_s: float):
        """(times, unwrapped residual phase, residual magnitude) at the bin nearest ``tau_s``."""
        i = self.residual.delay_index(tau_s)
        v = self.residual.values[:, i]
        return self.residual.times_s, np.unwrap(np.angle(v)), np.abs(v)


def _reader(source):
    if isinstance(source, CfrSeries):
        return lambda idx: source.values[idx]
    return source.values


def calibrate_source(source, cfg: PipelineConfig):
    """Outlier removal, per-snapshot preprocessing and calibration, chunked."""
    radio = source.radio
    if len(source.times_s) == 0:
        raise EmptySeriesError("input contains no snapshots")
    with stage("preprocess"):
        keep = (outlier_mask(source.rssi_db, cfg.preprocess) if cfg.preprocess.outlier_removal
                else np.ones(len(source.times_s), dtype=bool))
        kept = np.flatnonzero(keep)
        if kept.size == 0:
            raise EmptySeriesError("all snapshots rejected as outliers")
    read = _reader(source)
    k = radio.indices
    parts, taus, flags = [], [], 0
    for start in range(0, kept.size, cfg.chunk):
        idx = kept[start:start + cfg.chunk]
        with stage("preprocess"):
            vals = preprocess_values(read(idx), k, cfg.preprocess)
        chunk = CfrSeries(radio, source.times_s[idx], vals, source.rssi_db[idx])
        with stage("losref"):
            res = calibrate_series(chunk, cfg.calibration, cfg.cir_delay_window_s,
                                   chunk=cfg.chunk)
        parts.append(res.series.values)
        taus.append(res.peak_delay_s)
        flags += res.dominance_warning_count
        grid = res.series.delay_grid_s
    calibrated = CirSeries(radio, source.times_s[kept], grid, np.concatenate(parts), "calibrated")
    return calibrated, np.concatenate(taus), int(keep.size - kept.size), flags


def run_pipeline(source, cfg: PipelineConfig | None = None) -> PipelineResult:
    cfg = cfg or PipelineConfig()
    if source.radio != cfg.radio:
        warnings.warn("input radio parameters differ from the config; using the input's",
                      stacklevel=2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        calibrated, peak_tau, dropped, flags = calibrate_source(source, cfg)
        with stage("clutter"):
            residual, clutter = remove_clutter(calibrated, cfg.clutter_window)
        with stage("doppler"):
            resampled, _ = uniform_resample(residual, cfg.resample_step_s)
            peaks, columns, times, exported, detected = [], [], [], [], []
            ref = (abs(cfg.radio.wavelength_m / (4 * np.pi * cfg.calibration.reference_distance_m))
                   * cfg.stft.window().sum()) ** 2
            floor = ref * 10 ** (cfg.detection_floor_db / 10)
            frames = iter_delay_doppler(resampled, cfg.stft, cfg.doppler_delay_window_s)
            n_frames = max(0, (len(resampled) - cfg.stft.segment_length) // cfg.stft.hop + 1)
            pick = set(np.linspace(0, n_frames - 1, min(cfg.export_frames, n_frames))
                       .round().astype(int).tolist()) if n_frames else set()
            sep = None
            if cfg.scene is not None:
                sep = cfg.scene.trajectory.tx_rx_separation_m
            first = None
            for i, f in enumerate(frames):
                power = np.abs(f.values) ** 2
                columns.append(power.sum(axis=0))
                times.append(f.center_time_s)
                first = first or f
                is_target = bool(power.max() > floor)
                detected.append(is_target)
                if is_target:
                    peaks.append(peak_delay_doppler(f, cfg.radio.wavelength_m, sep,
                                                    cfg.radio.speed_of_light_m_s))
                if i in pick:
                    exported.append(f)
            dt_map = DopplerTimeMap(np.array(times), first.doppler_grid_hz,
                                    np.stack(columns, axis=1))
    notes = [str(w.message) for w in caught]
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return PipelineResult(calibrated, residual, clutter, resampled, peak_tau, peaks,
                          np.array(detected, dtype=bool), dt_map, exported,
                          len(calibrated), dropped, flags, notes)


def manifest(cfg: PipelineConfig, command: str, products: list[str], warnings_: list[str],
             extra: dict | None = None) -> dict:
    out = {"command": command, "version": __version__, "config_sha256": cfg.config_hash,
           "seed": cfg.seed, "products": sorted(products), "warnings": warnings_}
    out.update(extra or {})
    return out


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


__all__ = ["IoConfig", "PipelineConfig", "PipelineResult", "load_config", "run_pipeline",
           "calibrate_source", "manifest", "file_sha256"]
