"""Preset synthetic scenes (Tx at (-0.5, 0), Rx at (0.5, 0)).

A target on the +x axis at ``x > 0.5`` has bistatic range ``2x``, so a
speed ``v`` along x gives ``d_dot = 2v``.
"""

from __future__ import annotations

import math

from .config import RadioParams
from .scene_sim import (ArtifactConfig, ClockModel, PacketTimingModel, PathSpec, SceneConfig,
                        Trajectory)

GAIT_RANGE_RATE = -1.614  # m/s, approach leg
RESPIRATION_SWING = 40.35e-3  # bistatic-range peak-to-peak, m
RESPIRATION_RATE = 0.25  # Hz


def random_clock() -> ClockModel:
    return ClockModel(delay_law="uniform", phase_law="uniform")


def jittered_timing() -> PacketTimingModel:
    return PacketTimingModel(jitter_law="empirical")


def multipath_scene(duration_s: float = 1.0, seed: int = 0, **kw) -> SceneConfig:
    """LoS plus two static scatterers, no target."""
    paths = (PathSpec(complex(0.3 * math.cos(1.0), 0.3 * math.sin(1.0)) * 4.28e-3, 25e-9),
             PathSpec(complex(0.0, -0.15) * 4.28e-3, 47.5e-9))
    base = dict(duration_s=duration_s, target_gain_db=None, static_paths=paths, seed=seed)
    base.update(kw)
    return SceneConfig(**base)


def static_scene(duration_s: float = 2.0, seed: int = 0, **kw) -> SceneConfig:
    """Stationary target and clutter: the residual should vanish."""
    base = dict(duration_s=duration_s, trajectory=Trajectory("static", start_m=(3.0, 0.0)),
                static_paths=multipath_scene().static_paths, seed=seed)
    base.update(kw)
    return SceneConfig(**base)


def gait_scene(approach: bool = True, duration_s: float = 2.0, seed: int = 0,
               range_rate_m_s: float = GAIT_RANGE_RATE, **kw) -> SceneConfig:
    """Straight-line walk along x with |d_dot| = ``range_rate_m_s``.

    Approach starts at x = 5 m and walks inward; recede starts at 3 m and
    walks outward.
    """
    speed = abs(range_rate_m_s) / 2
    if approach:
        traj = Trajectory("straight_line", start_m=(5.0, 0.0), velocity_m_s=(-speed, 0.0))
    else:
        traj = Trajectory("straight_line", start_m=(3.0, 0.0), velocity_m_s=(speed, 0.0))
    base = dict(duration_s=duration_s, trajectory=traj, target_gain_db=-20.0, seed=seed)
    base.update(kw)
    return SceneConfig(**base)


def respiration_scene(duration_s: float = 20.0, seed: int = 0,
                      swing_m: float = RESPIRATION_SWING, rate_hz: float = RESPIRATION_RATE,
                      **kw) -> SceneConfig:
    """Seated target at (3, 0) whose chest moves along x.

    Bistatic range is ``2x``, so a peak-to-peak bistatic swing ``S`` needs a
    displacement amplitude ``S / 4``.
    """
    traj = Trajectory("sinusoidal_displacement", start_m=(3.0, 0.0), amplitude_m=swing_m / 4,
                      rate_hz=rate_hz, direction=(1.0, 0.0))
    base = dict(duration_s=duration_s, trajectory=traj, target_gain_db=-20.0, seed=seed)
    base.update(kw)
    return SceneConfig(**base)


def walkby_scene(duration_s: float = 13.0, speed_m_s: float = 1.2, seed: int = 0,
                 **kw) -> SceneConfig:
    """Walk along y at x = 3 m: approach, closest point at mid-run, recede."""
    y0 = -speed_m_s * duration_s / 2
    traj = Trajectory("straight_line", start_m=(3.0, y0), velocity_m_s=(0.0, speed_m_s))
    base = dict(duration_s=duration_s, trajectory=traj, target_gain_db=-20.0, seed=seed)
    base.update(kw)
    return SceneConfig(**base)


def clutter_scene(duration_s: float = 2.0, seed: int = 0, disparity_db: float = 20.0,
                  **kw) -> SceneConfig:
    """Approaching walker ``disparity_db`` below two static scatterers."""
    clutter_amp = 10 ** (-6 / 20)
    los = RadioParams().wavelength_m / (4 * math.pi)
    paths = (PathSpec(complex(clutter_amp * los, 0.0), 12e-9),
             PathSpec(complex(0.0, clutter_amp * los), 45e-9))
    return gait_scene(True, duration_s, seed, static_paths=paths,
                      target_gain_db=-6.0 - disparity_db, **kw)


def device_artifacts() -> ArtifactConfig:
    return ArtifactConfig.device_like()
