"""Track a target walking past the link and compare against ground truth."""

import argparse
from dataclasses import replace

import numpy as np

from wifiradar import scenes as S
from wifiradar.pipeline import PipelineConfig, run_pipeline
from wifiradar.scene_sim import bistatic_range, bistatic_range_rate, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=13.0)
    ap.add_argument("--speed", type=float, default=1.2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--every", type=int, default=20, help="print every n-th frame")
    args = ap.parse_args()
    scene = S.walkby_scene(args.duration, args.speed, args.seed, clock=S.random_clock(),
                           timing=S.jittered_timing(), noise_std=1e-3)
    radio = PipelineConfig().radio
    res = run_pipeline(simulate(scene).series, PipelineConfig(scene=scene))
    traj = replace(scene.trajectory, duration_s=scene.duration_s)
    c, lam = radio.speed_of_light_m_s, radio.wavelength_m
    print(f"{'t [s]':>7} {'tau [ns]':>9} {'true':>7} {'nu [Hz]':>8} {'true':>7}")
    errs = []
    for i, p in enumerate(res.peaks):
        tau = bistatic_range(traj, p.center_time_s) / c
        nu = -bistatic_range_rate(traj, p.center_time_s) / lam
        errs.append((p.bistatic_delay_s - tau, p.doppler_hz - nu))
        if i % args.every == 0:
            print(f"{p.center_time_s:7.2f} {p.bistatic_delay_s * 1e9:9.2f} {tau * 1e9:7.2f} "
                  f"{p.doppler_hz:8.2f} {nu:7.2f}")
    e = np.abs(np.array(errs))
    print(f"frames {res.detected.size}, detected {len(res.peaks)}")
    print(f"median |delay error| {np.median(e[:, 0]) * 1e9:.2f} ns, "
          f"median |Doppler error| {np.median(e[:, 1]):.2f} Hz")


if __name__ == "__main__":
    main()
