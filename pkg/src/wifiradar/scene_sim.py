"""Synthetic bistatic Wi-Fi scenes.

A scene is a tapped-delay-line channel: a line-of-sight tap fixed by the
Tx-Rx geometry, optional static scatterers, and one moving target whose
delay follows the bistatic range of a trajectory.  Snapshots are sampled
at jittered packet times, then corrupted the way a free-running receiver
would corrupt them (random delay/phase offsets, DC/notch/edge artifacts,
RSSI drops) so every downstream stage can be checked against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from .config import RadioParams, _default_notches
from .errors import ConfigError, EmptySeriesError, RangeError
from .preprocess import attenuation_model
from .series import CfrSeries, CfrSnapshot

# Fixed so that generated series do not depend on how callers chunk work.
_CHUNK = 2048


# ---------------------------------------------------------------------------
# scene description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathSpec:
    complex_gain: complex
    delay_s: float

    def __post_init__(self):
        if not self.delay_s >= 0:
            raise ConfigError("path delay must be non-negative")
        if not np.isfinite(self.complex_gain):
            raise ConfigError("path gain must be finite")


@dataclass(frozen=True)
class Trajectory:
    """Target motion in the horizontal plane.

    ``static``: fixed at ``start_m``.
    ``straight_line``: ``start_m + velocity_m_s * t``.
    ``sinusoidal_displacement``: ``start_m + direction * amplitude_m *
    sin(2 pi rate_hz t + phase_rad)``.
    """

    kind: str = "static"
    start_m: tuple[float, float] = (3.0, 0.0)
    velocity_m_s: tuple[float, float] = (0.0, 0.0)
    amplitude_m: float = 0.0
    rate_hz: float = 0.25
    direction: tuple[float, float] = (1.0, 0.0)
    phase_rad: float = 0.0
    tx_position_m: tuple[float, float] = (-0.5, 0.0)
    rx_position_m: tuple[float, float] = (0.5, 0.0)
    duration_s: float | None = None

    def __post_init__(self):
        if self.kind not in ("static", "straight_line", "sinusoidal_displacement"):
            raise ConfigError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "sinusoidal_displacement":
            if self.amplitude_m < 0 or not self.rate_hz > 0:
                raise ConfigError("sinusoidal trajectory needs amplitude >= 0 and rate > 0")
            if np.hypot(*self.direction) == 0:
                raise ConfigError("direction must be non-zero")

    @property
    def tx_rx_separation_m(self) -> float:
        return float(np.hypot(*np.subtract(self.rx_position_m, self.tx_position_m)))

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        upper = np.inf if self.duration_s is None else self.duration_s * (1 + 1e-12) + 1e-12
        if np.any(t < -1e-12) or np.any(t > upper):
            raise RangeError("time outside the scene duration")
        return t

    def _unit_direction(self):
        d = np.asarray(self.direction, dtype=float)
        return d / np.hypot(*d)

    def position(self, t) -> np.ndarray:
        t = self._check_time(t)
        start = np.asarray(self.start_m, dtype=float)
        if self.kind == "static":
            return np.broadcast_to(start, t.shape + (2,)).copy()
        if self.kind == "straight_line":
            return start + t[..., None] * np.asarray(self.velocity_m_s, dtype=float)
        s = self.amplitude_m * np.sin(2 * np.pi * self.rate_hz * t + self.phase_rad)
        return start + s[..., None] * self._unit_direction()

    def velocity(self, t) -> np.ndarray:
        t = self._check_time(t)
        if self.kind == "static":
            return np.zeros(t.shape + (2,))
        if self.kind == "straight_line":
            return np.broadcast_to(np.asarray(self.velocity_m_s, float), t.shape + (2,)).copy()
        w = 2 * np.pi * self.rate_hz
        s_dot = self.amplitude_m * w * np.cos(w * t + self.phase_rad)
        return s_dot[..., None] * self._unit_direction()


def bistatic_range(traj: Trajectory, t):
    """|target - tx| + |target - rx| in metres (scalar or array like ``t``)."""
    p = traj.position(t)
    d = (np.linalg.norm(p - np.asarray(traj.tx_position_m), axis=-1)
         + np.linalg.norm(p - np.asarray(traj.rx_position_m), axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def bistatic_range_rate(traj: Trajectory, t):
    """Analytic time derivative of :func:`bistatic_range`."""
    p = traj.position(t)
    v = traj.velocity(t)
    rate = 0.0
    for anchor in (traj.tx_position_m, traj.rx_position_m):
        r = p - np.asarray(anchor)
        norm = np.linalg.norm(r, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            rate = rate + np.where(norm > 0, np.sum(r * v, axis=-1) / norm, 0.0)
    return float(rate) if np.ndim(rate) == 0 else rate


@dataclass(frozen=True)
class ClockModel:
    delay_law: str = "fixed"
    delay_s: float = 0.0
    delay_min_s: float = -100e-9
    delay_max_s: float = 100e-9
    phase_law: str = "fixed"
    phase_rad: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.delay_law not in ("fixed", "uniform") or self.phase_law not in ("fixed", "uniform"):
            raise ConfigError("clock laws must be 'fixed' or 'uniform'")
        if self.delay_min_s > self.delay_max_s:
            raise ConfigError("delay_min_s must not exceed delay_max_s")

    def draw(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Per-snapshot (alpha, beta); draws are independent across snapshots."""
        if self.seed is not None:
            rng = np.random.default_rng(self.seed)
        if self.delay_law == "uniform":
            alpha = rng.uniform(self.delay_min_s, self.delay_max_s, n)
        else:
            alpha = np.full(n, float(self.delay_s))
        if self.phase_law == "uniform":
            beta = rng.uniform(0.0, 2 * np.pi, n)
        else:
            beta = np.full(n, float(self.phase_rad))
        return alpha, beta


@dataclass(frozen=True)
class PacketTimingModel:
    """Receiver observation times.

    ``empirical`` draws intervals from a lognormal core around ``median_s``
    plus rare long gaps (up to ``tail_max_s``); the core width and centre
    are solved so the mixture's median and MAD hit the configured values.
    """

    nominal_interval_s: float = 1e-3
    jitter_law: str = "none"
    median_s: float = 1.069e-3
    mad_s: float = 0.017e-3
    tail_max_s: float = 6.5e-3
    min_interval_s: float = 0.5e-3
    tail_probability: float = 0.002
    drop_probability: float = 0.0

    def __post_init__(self):
        if self.jitter_law not in ("none", "empirical"):
            raise ConfigError(f"unknown jitter law {self.jitter_law!r}")
        if not self.nominal_interval_s > 0 or not self.median_s > 0:
            raise ConfigError("intervals must be positive")
        if not 0 <= self.drop_probability < 1 or not 0 <= self.tail_probability < 0.5:
            raise ConfigError("probabilities out of range")
        if self.jitter_law == "empirical" and not 0 < self.mad_s < 0.3 * self.median_s:
            raise ConfigError("mad_s must be positive and well below median_s")


def _lognormal_core(median: float, mad: float, p_tail: float) -> tuple[float, float]:
    """(centre, sigma) of the lognormal core giving the requested mixture stats."""
    z0 = special.ndtri(0.5 / (1.0 - p_tail))
    r = mad / median
    lo, hi = math.log1p(-r), math.log1p(r)

    def within(sigma):
        return (1 - p_tail) * (special.ndtr(hi / sigma + z0) - special.ndtr(lo / sigma + z0)) - 0.5

    sigma = optimize.brentq(within, 1e-9, 10.0, xtol=1e-15)
    return median * math.exp(-sigma * z0), sigma


def _draw_intervals(model: PacketTimingModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if model.jitter_law == "none":
        return np.full(n, model.nominal_interval_s)
    centre, sigma = _lognormal_core(model.median_s, model.mad_s, model.tail_probability)
    core = centre * np.exp(sigma * rng.standard_normal(n))
    tail = rng.uniform(1.5 * model.median_s, model.tail_max_s, n)
    is_tail = rng.random(n) < model.tail_probability
    return np.clip(np.where(is_tail, tail, core), model.min_interval_s, model.tail_max_s)


def generate_packet_times(model: PacketTimingModel, duration_s: float,
                          rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Strictly increasing observation times in ``[0, duration_s)``."""
    if not duration_s > 0:
        raise EmptySeriesError("scene duration must be positive")
    rng = np.random.default_rng(rng)
    mean_interval = (model.nominal_interval_s if model.jitter_law == "none"
                     else model.median_s)
    n_guess = int(duration_s / mean_interval) + 64
    chunks, total = [], 0.0
    while total < duration_s:
        iv = _draw_intervals(model, n_guess, rng)
        chunks.append(iv)
        total += iv.sum()
    intervals = np.concatenate(chunks)
    times = np.concatenate([[0.0], np.cumsum(intervals)[:-1]])
    times = times[times < duration_s]
    if model.drop_probability > 0:
        keep = rng.random(times.size) >= model.drop_probability
        times = times[keep]
    return times


@dataclass(frozen=True)
class ArtifactConfig:
    dc_corruption: bool = False
    dc_phase_mode: str = "constant"
    dc_phase_rad: float = math.pi
    dc_index_range: tuple[int, int] = (-11, 11)
    notch: bool = False
    notch_indices: tuple[int, ...] = field(default_factory=_default_notches)
    notch_gain: float = 0.3
    edge_attenuation: bool = False
    attenuation_breakpoints: tuple[int, int] = (680, 704)
    attenuation_floor: float = 0.6
    rssi_drop_probability: float = 0.0
    rssi_drop_db: float = 15.0

    def __post_init__(self):
        if self.dc_phase_mode not in ("constant", "random"):
            raise ConfigError("dc_phase_mode must be 'constant' or 'random'")
        if self.rssi_drop_db <= 10.0 and self.rssi_drop_probability > 0:
            raise ConfigError("rssi_drop_db must exceed 10 dB")

    @classmethod
    def device_like(cls, **overrides) -> "ArtifactConfig":
        kw = dict(dc_corruption=True, notch=True, edge_attenuation=True,
                  rssi_drop_probability=0.002)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class SceneConfig:
    duration_s: float = 10.0
    trajectory: Trajectory = field(default_factory=Trajectory)
    # target tap magnitude relative to the LoS tap; None means no target
    target_gain_db: float | None = -20.0
    target_phase_rad: float = 0.0
    include_los: bool = True
    los_phase_rad: float = 0.0
    static_paths: tuple[PathSpec, ...] = ()
    clock: ClockModel = field(default_factory=ClockModel)
    timing: PacketTimingModel = field(default_factory=PacketTimingModel)
    artifacts: ArtifactConfig = field(default_factory=ArtifactConfig)
    # complex AWGN std per subcarrier, relative to the LoS tap magnitude
    noise_std: float = 0.0
    rssi_offset_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.duration_s < 0:
            raise ConfigError("duration_s must be non-negative")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if not self.include_los and not self.static_paths and self.target_gain_db is None:
            raise ConfigError("scene has no propagation paths")

    def los_gain(self, radio: RadioParams) -> complex:
        """Free-space amplitude at the Tx-Rx distance."""
        d = self.trajectory.tx_rx_separation_m
        return radio.wavelength_m / (4 * math.pi * d) * complex(math.cos(self.los_phase_rad),
                                                                 math.sin(self.los_phase_rad))

    def los_delay_s(self, radio: RadioParams) -> float:
        return self.trajectory.tx_rx_separation_m / radio.speed_of_light_m_s


# ---------------------------------------------------------------------------
# channel synthesis
# ---------------------------------------------------------------------------

def path_taps(scene: SceneConfig, times, radio: RadioParams):
    """(gains, delays), each shaped (len(times), n_paths), at the given times."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = times.size
    gains, delays = [], []
    los = scene.los_gain(radio)
    if scene.include_los:
        gains.append(np.full(n, los))
        delays.append(np.full(n, scene.los_delay_s(radio)))
    for p in scene.static_paths:
        gains.append(np.full(n, complex(p.complex_gain)))
        delays.append(np.full(n, p.delay_s))
    if scene.target_gain_db is not None:
        g = abs(los) * 10 ** (scene.target_gain_db / 20) * np.exp(1j * scene.target_phase_rad)
        gains.append(np.full(n, g))
        delays.append(bistatic_range(scene.trajectory, times) / radio.speed_of_light_m_s)
    return np.stack(gains, axis=1), np.stack(delays, axis=1)


def tdl_cfr(gains, delays, radio: RadioParams) -> np.ndarray:
    """sum_l eta_l exp(-j2pi f_c tau_l) exp(-j2pi f tau_l) on the subcarrier grid.

    ``gains``/``delays`` are (n, L); returns (n, K).
    """
    gains = np.atleast_2d(gains)
    delays = np.atleast_2d(delays)
    f = radio.frequencies_hz
    carrier = gains * np.exp(-2j * np.pi * radio.carrier_frequency_hz * delays)
    out = np.zeros((gains.shape[0], f.size), dtype=complex)
    for ell in range(gains.shape[1]):
        out += carrier[:, ell, None] * np.exp(-2j * np.pi * f[None, :] * delays[:, ell, None])
    return out


def rssi_from_values(values, offset_db: float = 0.0) -> np.ndarray:
    rms = np.sqrt(np.mean(np.abs(values) ** 2, axis=-1))
    return np.round(20 * np.log10(np.maximum(rms, 1e-300)) + offset_db)


def synth_cfr(scene: SceneConfig, t: float, radio: RadioParams | None = None) -> CfrSnapshot:
    """Ideal, offset-free CFR of the scene at observation time ``t``."""
    radio = radio or RadioParams()
    g, d = path_taps(scene, [t], radio)
    values = tdl_cfr(g, d, radio)[0]
    return CfrSnapshot(float(t), values, float(rssi_from_values(values, scene.rssi_offset_db)),
                       radio.indices)


def clock_phase_ramp(alpha, beta, radio: RadioParams) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)[..., None]
    beta = np.asarray(beta, dtype=float)[..., None]
    return np.exp(1j * (2 * np.pi * radio.frequencies_hz * alpha + beta))


def apply_clock_offsets(h: CfrSnapshot, alpha: float, beta: float,
                        radio: RadioParams | None = None) -> CfrSnapshot:
    """H(f) exp(+j2pi f alpha) exp(j beta): delay axis shifted by -alpha, rotated by beta."""
    radio = radio or RadioParams()
    f = np.asarray(h.subcarrier_indices) * radio.subcarrier_spacing_hz
    return h.with_values(h.values * np.exp(1j * (2 * np.pi * f * alpha + beta)))


def _inject(values, indices, cfg: ArtifactConfig, rng, drop_mask):
    values = np.array(values, dtype=complex, copy=True)
    k = np.asarray(indices)
    if cfg.dc_corruption:
        lo, hi = cfg.dc_index_range
        dc = (k >= lo) & (k <= hi)
        if cfg.dc_phase_mode == "constant":
            values[..., dc] *= np.exp(1j * cfg.dc_phase_rad)
        else:
            junk = rng.uniform(0, 2 * np.pi, values[..., dc].shape)
            values[..., dc] = np.abs(values[..., dc]) * np.exp(1j * junk)
    if cfg.notch:
        values[..., np.isin(k, cfg.notch_indices)] *= cfg.notch_gain
    if cfg.edge_attenuation:
        values *= attenuation_model(k, cfg.attenuation_breakpoints, cfg.attenuation_floor)
    if drop_mask is not None and np.any(drop_mask):
        values[drop_mask] *= 10 ** (-cfg.rssi_drop_db / 20)
    return values


def inject_device_artifacts(s: CfrSnapshot, cfg: ArtifactConfig,
                            rng: np.random.Generator | int | None = None,
                            drop_rssi: bool = False) -> CfrSnapshot:
    """Apply the configured device artifacts to one snapshot.

    ``drop_rssi`` forces the RSSI-drop artifact on this snapshot (the
    series simulator chooses such snapshots with ``rssi_drop_probability``).
    """
    rng = np.random.default_rng(rng)
    values = _inject(s.values, s.subcarrier_indices, cfg, rng,
                     np.array(True) if drop_rssi else None)
    rssi = s.rssi_db - round(cfg.rssi_drop_db) if drop_rssi else s.rssi_db
    return CfrSnapshot(s.time_s, values, rssi, s.subcarrier_indices)


@dataclass
class Simulation:
    series: CfrSeries
    alpha_s: np.ndarray
    beta_rad: np.ndarray
    rssi_dropped: np.ndarray

    def target_delay_s(self, scene: SceneConfig) -> np.ndarray:
        radio = self.series.radio
        return bistatic_range(scene.trajectory, self.series.times_s) / radio.speed_of_light_m_s


def _streams(scene: SceneConfig):
    return np.random.SeedSequence(scene.seed).spawn(4)


def simulate_chunks(scene: SceneConfig, radio: RadioParams | None = None, times=None):
    """Yield (times, values, rssi_db, alpha, beta, dropped) blocks of the scene.

    Randomness is keyed to the scene seed and a fixed internal block size,
    so the concatenated output is bit-identical however it is consumed.
    """
    radio = radio or RadioParams()
    ss_timing, ss_clock, ss_noise, ss_art = _streams(scene)
    if times is None:
        times = generate_packet_times(scene.timing, scene.duration_s,
                                      np.random.default_rng(ss_timing))
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise EmptySeriesError("scene produced no snapshots")
    traj = scene.trajectory
    if traj.duration_s is None:
        scene = replace(scene, trajectory=replace(traj, duration_s=scene.duration_s))
    alpha, beta = scene.clock.draw(times.size, np.random.default_rng(ss_clock))
    art_rng = np.random.default_rng(ss_art)
    dropped = art_rng.random(times.size) < scene.artifacts.rssi_drop_probability
    noise_seeds = ss_noise.spawn((times.size + _CHUNK - 1) // _CHUNK)
    art_seeds = ss_art.spawn(len(noise_seeds))
    noise_scale = scene.noise_std * abs(scene.los_gain(radio)) / math.sqrt(2)
    for b, start in enumerate(range(0, times.size, _CHUNK)):
        sl = slice(start, start + _CHUNK)
        t = times[sl]
        g, d = path_taps(scene, t, radio)
        h = tdl_cfr(g, d, radio)
        if noise_scale > 0:
            nrng = np.random.default_rng(noise_seeds[b])
            h = h + noise_scale * (nrng.standard_normal(h.shape) + 1j * nrng.standard_normal(h.shape))
        h = h * clock_phase_ramp(alpha[sl], beta[sl], radio)
        rssi = rssi_from_values(h, scene.rssi_offset_db)
        h = _inject(h, radio.indices, scene.artifacts, np.random.default_rng(art_seeds[b]),
                    dropped[sl])
        rssi = rssi - np.where(dropped[sl], round(scene.artifacts.rssi_drop_db), 0)
        yield t, h, rssi, alpha[sl], beta[sl], dropped[sl]


def simulate(scene: SceneConfig, radio: RadioParams | None = None, times=None) -> Simulation:
    radio = radio or RadioParams()
    blocks = list(simulate_chunks(scene, radio, times))
    cat = [np.concatenate([b[i] for b in blocks]) for i in range(6)]
    series = CfrSeries(radio, cat[0], cat[1], cat[2])
    return Simulation(series, cat[3], cat[4], cat[5])


def simulate_series(scene: SceneConfig, radio: RadioParams | None = None) -> CfrSeries:
    return simulate(scene, radio).series
