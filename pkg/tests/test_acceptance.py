"""Acceptance criteria 1-9 on synthetic scenes.

Each test records a one-line verdict that the conftest prints in the
terminal summary.  Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import record
from wifiradar import scenes as S
from wifiradar.cir_builder import build_cir, ring_transform, windowed_spectrum
from wifiradar.clutter import remove_clutter
from wifiradar.config import CalibrationConfig, PreprocessConfig, RadioParams, StftParams
from wifiradar.doppler import (baseline_magnitude_stft, interval_stats, peak_delay_doppler,
                               stft_delay_doppler)
from wifiradar.formats import read_csir, write_csir
from wifiradar.losref import calibrate_series
from wifiradar.pipeline import PipelineConfig, run_pipeline
from wifiradar.preprocess import preprocess_series
from wifiradar.scene_sim import (ClockModel, PacketTimingModel, SceneConfig, bistatic_range,
                                 bistatic_range_rate, generate_packet_times, simulate)
from wifiradar.series import CfrSeries, CfrSnapshot

pytestmark = pytest.mark.acceptance

RADIO = RadioParams()
LAM = RADIO.wavelength_m
C = RADIO.speed_of_light_m_s
DELAY_BIN = 1 / RADIO.bandwidth_hz  # 6.25 ns
DOPPLER_BIN = 3.9  # 1 / (256 * ~1 ms)


def noisy(scene_fn, *args, **kw):
    kw.setdefault("clock", S.random_clock())
    kw.setdefault("timing", S.jittered_timing())
    kw.setdefault("noise_std", 1e-3)
    return scene_fn(*args, **kw)


def truth(scene, t):
    traj = replace(scene.trajectory, duration_s=scene.duration_s)
    return bistatic_range(traj, t) / C, -bistatic_range_rate(traj, t) / LAM


def run(scene):
    t0 = time.perf_counter()
    sim = simulate(scene)
    res = run_pipeline(sim.series, PipelineConfig(scene=scene))
    return sim, res, time.perf_counter() - t0


def phase_at_truth(res, scene):
    """Unwrapped residual phase at the ground-truth delay bin of every snapshot."""
    r = res.residual
    tau, _ = truth(scene, r.times_s)
    idx = np.rint((tau - r.delay_grid_s[0]) / RADIO.delay_step_s).astype(int)
    v = r.values[np.arange(len(r)), idx]
    return r.times_s, np.unwrap(np.angle(v))


@pytest.fixture(scope="module")
def approach():
    scene = noisy(S.gait_scene, True)
    return (scene,) + run(scene)


@pytest.fixture(scope="module")
def recede():
    scene = noisy(S.gait_scene, False)
    return (scene,) + run(scene)


def test_c1_offset_invariance():
    t0 = time.perf_counter()
    base = S.multipath_scene(duration_s=1.0, noise_std=1e-3, seed=11)
    scene = replace(base, clock=ClockModel(delay_law="uniform", delay_min_s=-100e-9,
                                           delay_max_s=100e-9, phase_law="uniform"))
    ref_sim, off_sim = simulate(base), simulate(scene)
    n = len(off_sim.series)
    cfg = CalibrationConfig()
    outs = []
    for sim in (ref_sim, off_sim):
        pre = preprocess_series(sim.series, PreprocessConfig(outlier_removal=False,
                                                             edge_equalization=False))
        outs.append(calibrate_series(pre, cfg).series.values)
    a, b = outs
    dev = np.max(np.abs(b - a) / np.abs(a).max(axis=1, keepdims=True))
    elapsed = time.perf_counter() - t0
    spread = np.ptp(off_sim.alpha_s) * 1e9
    ok = n >= 1000 and dev < 1e-6 and elapsed < 30
    record(1, ok, f"{n} snapshots, alpha spread {spread:.0f} ns, max rel dev {dev:.2e} "
                  f"(< 1e-6), {elapsed:.1f} s (< 30 s)")
    assert ok


def test_c2_gait_doppler(approach, recede):
    scene_a, _, res_a, t_a = approach
    scene_r, _, res_r, t_r = recede
    t, ph = phase_at_truth(res_a, scene_a)
    slope = np.polyfit(t, ph, 1)[0]
    period_ms = 2 * np.pi / abs(slope) * 1e3
    nu_a = np.array([p.doppler_hz for p in res_a.peaks])
    nu_r = np.array([p.doppler_hz for p in res_r.peaks])
    ok = (abs(period_ms - 33) <= 2 and slope > 0
          and len(nu_a) > 0 and np.all(np.abs(nu_a - 30) <= DOPPLER_BIN)
          and len(nu_r) > 0 and np.all(np.abs(nu_r + 30) <= DOPPLER_BIN)
          and max(t_a, t_r) < 60)
    record(2, ok, f"phase period {period_ms:.2f} ms (33 +/- 2), approach nu* "
                  f"[{nu_a.min():.2f}, {nu_a.max():.2f}] Hz, recede nu* "
                  f"[{nu_r.min():.2f}, {nu_r.max():.2f}] Hz (+/-30 +/- 3.9), "
                  f"{max(t_a, t_r):.1f} s")
    assert ok


def test_c3_respiration():
    scene = noisy(S.respiration_scene)
    _, res, elapsed = run(scene)
    t, ph = phase_at_truth(res, scene)
    period = 1 / scene.trajectory.rate_hz
    swings = []
    for k in range(int(scene.duration_s / period)):
        m = (t >= k * period) & (t < (k + 1) * period)
        if m.sum() > 10:
            swings.append(np.ptp(ph[m]))
    dphi = float(np.median(swings))
    dd_mm = LAM * dphi / (2 * np.pi) * 1e3
    target = 3 * np.pi / 2
    ok = abs(dphi - target) <= 0.1 * target and abs(dd_mm - 40) <= 4 and elapsed < 60
    record(3, ok, f"phase excursion {dphi:.3f} rad (3pi/2 = {target:.3f} +/- 10%), "
                  f"recovered swing {dd_mm:.2f} mm (40 +/- 4), {elapsed:.1f} s")
    assert ok


def test_c4_clutter_disparity():
    scene = noisy(S.clutter_scene)
    _, res, _ = run(scene)
    tc = np.array([p.center_time_s for p in res.peaks])
    tau = np.array([p.bistatic_delay_s for p in res.peaks])
    tau_true, _ = truth(scene, tc)
    frac = float(np.mean(np.abs(tau - tau_true) <= DELAY_BIN)) if tau.size else 0.0
    n_frames = res.detected.size
    frac_all = frac * tau.size / n_frames
    ok = frac_all >= 0.95
    record(4, ok, f"target 20 dB below clutter: {frac_all:.1%} of {n_frames} frames "
                  f"within 6.25 ns of truth (>= 95%)")
    assert ok


def _sidelobes(series, cfg):
    s = preprocess_series(series, cfg)
    mag = np.abs(build_cir(s[0]).values)
    ip = int(np.argmax(mag))
    period = RADIO.ring_period_s
    d = ((np.arange(mag.size) - ip) * RADIO.delay_step_s + period / 2) % period - period / 2
    # Blackman main lobe spans about +/-19 ns for 2025 subcarriers
    side = np.abs(d) > 20e-9
    pre = (d < -20e-9) & (d > -500e-9)
    db = lambda m: 20 * np.log10(mag[m].max() / mag[ip])
    return db(side), db(pre)


def test_c5_sidelobe_floor():
    clean = SceneConfig(duration_s=0.005, target_gain_db=None)
    dirty = replace(clean, artifacts=S.device_artifacts())
    clean_cfr = simulate(clean).series
    dirty_cfr = simulate(dirty).series
    # a clean device has no edge roll-off to undo
    side_clean, _ = _sidelobes(clean_cfr, PreprocessConfig(edge_equalization=False))
    _, pre_off = _sidelobes(dirty_cfr, PreprocessConfig.disabled())
    side_on, _ = _sidelobes(dirty_cfr, PreprocessConfig())
    ok = side_clean <= -55 and pre_off >= -30 and side_on <= -50
    record(5, ok, f"clean {side_clean:.1f} dB (<= -55), artifacts unprocessed pre-LoS "
                  f"{pre_off:.1f} dB (>= -30), preprocessed {side_on:.1f} dB (<= -50)")
    assert ok


def test_c6_timing_statistics():
    model = PacketTimingModel(jitter_law="empirical")
    times = generate_packet_times(model, 25.0, np.random.default_rng(6))
    st = interval_stats(times)
    n = times.size - 1
    ok = (n >= 10_000 and abs(st.median_s / 1.069e-3 - 1) <= 0.05
          and abs(st.mad_s / 0.017e-3 - 1) <= 0.05
          and st.min_s >= 0.5e-3 and st.max_s <= 6.5e-3)
    record(6, ok, f"{n} intervals: median {st.median_s * 1e3:.4f} ms (1.069 +/- 5%), "
                  f"MAD {st.mad_s * 1e3:.5f} ms (0.017 +/- 5%), range "
                  f"[{st.min_s * 1e3:.3f}, {st.max_s * 1e3:.3f}] ms")
    assert ok


def test_c7_sign_asymmetry(approach):
    scene, sim, res, _ = approach
    pw = res.doppler_time.power
    nu = res.doppler_time.doppler_grid_hz
    band = lambda c: np.abs(nu - c) <= DOPPLER_BIN
    asym = 10 * np.log10(pw[band(30)].sum() / pw[band(-30)].sum())
    pre = preprocess_series(sim.series, PreprocessConfig())
    sym, peaks = [], []
    for mode, index in (("subcarrier", 100), ("pc", 1)):
        tf = baseline_magnitude_stft(pre, StftParams(), mode, index)
        p = tf.power[1:]  # row 0 is the unpaired -fs/2 bin
        sym.append(np.array_equal(p, p[::-1]))
        peaks.append(abs(tf.doppler_grid_hz[1 + np.argmax(p.sum(axis=1))]))
    ok = all(sym) and asym >= 10 and all(abs(f - 30) <= DOPPLER_BIN for f in peaks)
    record(7, ok, f"baseline symmetric (subcarrier, PC1): {sym}, baseline lines at "
                  f"+/-{peaks[0]:.1f} / +/-{peaks[1]:.1f} Hz; coherent +30/-30 Hz ratio "
                  f"{asym:.1f} dB (>= 10)")
    assert ok


def test_c8_property_suite(tmp_path):
    rng = np.random.default_rng(8)
    k = RADIO.indices.size
    x = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    y = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    a, b = 0.7 - 1.1j, -2.3 + 0.4j
    cir = lambda v: build_cir(CfrSnapshot(0.0, v, 0.0, RADIO.indices)).values
    hx, hy = cir(x), cir(y)
    lin = np.abs(cir(a * x + b * y) - (a * hx + b * hy)).max() / np.abs(hx).max()

    n = 1234
    shifted = x * np.exp(-2j * np.pi * RADIO.frequencies_hz * n * RADIO.delay_step_s)
    shift = np.abs(cir(shifted) - np.roll(hx, n)).max() / np.abs(hx).max()

    wx = windowed_spectrum(x, RADIO)
    parseval = abs(np.sum(np.abs(ring_transform(wx, RADIO)) ** 2)
                   / (np.sum(np.abs(wx) ** 2) / RADIO.n_ring) - 1)

    scene = S.gait_scene(duration_s=0.6, static_paths=S.multipath_scene().static_paths)
    sim = simulate(scene)
    cal = calibrate_series(sim.series, CalibrationConfig()).series
    resid, _ = remove_clutter(cal)
    zero_mean = np.abs(resid.values.mean(axis=0)).max() / np.abs(cal.values).max()

    p = StftParams()
    base = stft_delay_doppler(resid, p, (0, 60e-9))
    nu0 = 57.3
    mod = resid.replace(values=resid.values
                        * np.exp(2j * np.pi * nu0 * resid.times_s)[:, None])
    moved = stft_delay_doppler(mod, p, (0, 60e-9))
    step = base[0].doppler_grid_hz[1] - base[0].doppler_grid_hz[0]
    drift, bin_err = 0.0, 0
    for f0, f1 in zip(base, moved):
        e0, e1 = peak_delay_doppler(f0), peak_delay_doppler(f1)
        drift = max(drift, abs(e1.power_db - e0.power_db))
        expect = e0.doppler_hz + nu0
        bin_err = max(bin_err, round(abs(e1.doppler_hz - expect) / step))

    m = 50
    vals = (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))).astype(np.complex64)
    series = CfrSeries(RADIO, np.cumsum(rng.uniform(0.5e-3, 2e-3, m)), vals.astype(complex),
                       rng.integers(-90, -30, m).astype(float))
    path = tmp_path / "rt.csir"
    write_csir(path, series)
    back = read_csir(path)
    lossless = (np.array_equal(back.values, series.values)
                and np.array_equal(back.times_s, series.times_s)
                and np.array_equal(back.rssi_db, series.rssi_db))

    ok = (lin < 1e-9 and shift < 1e-9 and parseval < 1e-9 and zero_mean < 1e-12
          and drift < 0.5 and bin_err <= 1 and lossless)
    record(8, ok, f"linearity {lin:.1e}, shift {shift:.1e}, Parseval {parseval:.1e} "
                  f"(< 1e-9); residual mean {zero_mean:.1e} (< 1e-12); Doppler shift "
                  f"drift {drift:.3f} dB (< 0.5), bin error {bin_err}; CSIR round-trip "
                  f"{'exact' if lossless else 'LOSSY'}")
    assert ok


def test_c9_walkby_tracking():
    scene = noisy(S.walkby_scene)
    _, res, _ = run(scene)
    tc = np.array([p.center_time_s for p in res.peaks])
    tau = np.array([p.bistatic_delay_s for p in res.peaks])
    nu = np.array([p.doppler_hz for p in res.peaks])
    tau_true, nu_true = truth(scene, tc)
    good = (np.abs(tau - tau_true) <= DELAY_BIN) & (np.abs(nu - nu_true) <= DOPPLER_BIN)
    frac = good.sum() / res.detected.size

    dm = res.doppler_time
    dominant = dm.doppler_grid_hz[np.argmax(dm.power, axis=0)]
    half = StftParams().segment_length / 2 * interval_stats(res.resampled.times_s).median_s
    t_ca = scene.duration_s / 2
    before = dm.times_s + half < t_ca
    after = dm.times_s - half > t_ca
    flip = bool(np.all(dominant[before] > 0) and np.all(dominant[after] < 0))
    ok = frac >= 0.9 and flip
    record(9, ok, f"{frac:.1%} of {res.detected.size} frames within one delay and one "
                  f"Doppler bin (>= 90%); map sign flip at closest approach: {flip}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
