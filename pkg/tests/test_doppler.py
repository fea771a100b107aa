import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wifiradar.config import RadioParams, StftParams
from wifiradar.doppler import (DelayDopplerFrame, baseline_magnitude_stft, baseline_signal,
                               doppler_grid, incoherent_doppler_time, interval_stats,
                               peak_delay_doppler, principal_components, resample_values,
                               stft_delay_doppler, stft_real, uniform_resample)
from wifiradar.errors import DataError, DegenerateInputError, StateError
from wifiradar.series import CfrSeries, CirSeries

R = RadioParams()
P = StftParams()
DT = 1e-3


def cir_series(values, times=None, state="residual"):
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    if times is None:
        times = np.arange(values.shape[0]) * DT
    return CirSeries(R, np.asarray(times, float), np.arange(values.shape[1]) * R.delay_step_s,
                     values, state)


def tone(nu, n=1024, dt=DT):
    return np.exp(2j * np.pi * nu * np.arange(n) * dt)


def test_interval_stats_uniform():
    s = interval_stats(np.arange(10) * 1e-3)
    assert s.median_s == pytest.approx(1e-3) and s.mad_s == pytest.approx(0, abs=1e-15)


def test_interval_stats_example():
    s = interval_stats([0, 1, 3, 4, 10])
    assert s.median_s == 1.5 and s.mad_s == 0.5 and s.min_s == 1 and s.max_s == 6


def test_interval_stats_too_short():
    with pytest.raises(DataError):
        interval_stats([1.0])


def test_resample_uniform_identity():
    v = tone(30, 50)
    grid, out, claimed = resample_values(np.arange(50) * DT, v, DT)
    assert claimed.all() and np.array_equal(out, v)
    assert np.allclose(grid.times_s, np.arange(50) * DT)


def test_resample_fills_dropped_packets():
    rng = np.random.default_rng(1)
    t = np.arange(2000) * DT
    keep = np.sort(rng.choice(t.size, 1200, replace=False))
    keep[0], keep[-1] = 0, t.size - 1
    t_obs = t[keep] + rng.uniform(-0.2, 0.2, keep.size) * DT
    t_obs[0] = 0.0
    v = np.exp(2j * np.pi * 30 * t_obs)
    grid, out, _ = resample_values(t_obs, v, DT)
    truth = np.exp(2j * np.pi * 30 * grid.times_s)
    assert np.abs(np.angle(out / truth)).max() < 0.05 * 2 * np.pi / 2


def test_resample_earlier_wins():
    t = np.array([0.0, 0.9e-3, 1.1e-3, 2e-3])
    grid, out, _ = resample_values(t, np.array([1.0, 2.0, 3.0, 4.0]), DT, "real")
    assert grid.count == 3 and out.tolist() == [1.0, 2.0, 4.0]


def test_resample_real_gap():
    grid, out, claimed = resample_values([0.0, 3e-3], np.array([0.0, 3.0]), DT, "real")
    assert np.allclose(out, [0, 1, 2, 3]) and claimed.tolist() == [True, False, False, True]


def test_uniform_resample_requires_calibration():
    with pytest.raises(StateError):
        uniform_resample(cir_series(tone(1, 10), state="raw"))


def test_doppler_grid_span():
    g = doppler_grid(P, DT)
    assert g.size == P.nfft
    assert g[0] == pytest.approx(-1 / (2 * DT))
    assert g[-1] == pytest.approx(1 / (2 * DT) - 1 / (P.nfft * DT))
    assert np.allclose(np.diff(g), 1 / (P.nfft * DT))


@pytest.mark.parametrize("nu", [30.0, -50.0])
def test_stft_tone_lands_on_its_bin(nu):
    frames = stft_delay_doppler(cir_series(tone(nu)), P)
    res = 1 / (P.nfft * DT)
    for f in frames:
        peak = peak_delay_doppler(f)
        assert abs(peak.doppler_hz - nu) <= res


def test_stft_constant_is_removed():
    frames = stft_delay_doppler(cir_series(np.full(600, 2 + 1j)), P)
    assert all(np.abs(f.values).max() < 1e-9 for f in frames)


def test_stft_frame_count_and_times():
    frames = stft_delay_doppler(cir_series(tone(5, 600)), P)
    assert len(frames) == (600 - P.segment_length) // P.hop + 1
    assert frames[0].center_time_s == pytest.approx(P.segment_length / 2 * DT)


def test_stft_too_short():
    with pytest.raises(DataError):
        stft_delay_doppler(cir_series(tone(5, 100)), P)


def test_stft_rejects_nonuniform():
    t = np.cumsum(np.r_[0, np.full(299, DT)])
    t[100:] += 0.3 * DT
    with pytest.raises(DataError):
        stft_delay_doppler(cir_series(tone(5, 300), times=t), P)


# near-DC tones are cancelled by mean removal, leaving no well-defined peak
@given(st.floats(10, 400), st.booleans())
def test_time_reversal_flips_doppler(nu, neg):
    nu = -nu if neg else nu
    x = tone(nu, 256)
    a = peak_delay_doppler(stft_delay_doppler(cir_series(x), P)[0])
    # conjugation is the complex equivalent of reversing time
    b = peak_delay_doppler(stft_delay_doppler(cir_series(np.conj(x)), P)[0])
    grid = doppler_grid(P, DT)
    if abs(a.doppler_hz) < grid[-1]:
        assert b.doppler_hz == pytest.approx(-a.doppler_hz, abs=1e-9)


def frame(values, delays=None, nus=None):
    values = np.asarray(values, dtype=complex)
    n_d, n_n = values.shape
    return DelayDopplerFrame(0.5, np.arange(n_d) * 1e-9 if delays is None else delays,
                             np.linspace(-2, 2, n_n) if nus is None else nus, values)


def test_peak_tie_breaks():
    v = np.zeros((3, 5))
    v[1, 0] = v[1, 3] = v[2, 2] = 1.0
    p = peak_delay_doppler(frame(v))
    assert p.bistatic_delay_s == 1e-9 and p.doppler_hz == 1.0


def test_peak_zero_frame():
    with pytest.raises(DegenerateInputError):
        peak_delay_doppler(frame(np.zeros((2, 2))))


def test_peak_velocities():
    lam = R.wavelength_m
    nu = 30.0
    v = np.zeros((2, 3))
    v[1, 2] = 1
    f = frame(v, delays=np.array([0, 20e-9]), nus=np.array([-nu, 0, nu]))
    p = peak_delay_doppler(f, lam, tx_rx_separation_m=1.0)
    assert p.bistatic_range_rate_m_s == pytest.approx(-nu * lam)
    assert p.effective_radial_velocity_m_s == pytest.approx(-nu * lam / 2)
    # separation comparable to range: monostatic velocity is withheld
    assert peak_delay_doppler(f, lam, tx_rx_separation_m=2.0).effective_radial_velocity_m_s is None


def test_incoherent_two_targets():
    x = np.zeros((600, 2), complex)
    x[:, 0] = tone(30, 600)
    x[:, 1] = 0.5 * tone(-50, 600)
    frames = stft_delay_doppler(cir_series(x), P)
    m = incoherent_doppler_time(frames)
    col = m.power[:, 0]
    g = m.doppler_grid_hz
    top2 = sorted(g[np.argsort(col)[-40:]], key=abs)
    assert any(abs(f - 30) < 1 for f in top2) and any(abs(f + 50) < 1 for f in top2)
    assert m.power_db().max() == 0.0


def cfr(values, times=None):
    values = np.asarray(values, complex)
    n = values.shape[0]
    if times is None:
        times = np.arange(n) * DT
    return CfrSeries(R, np.asarray(times, float), values, np.zeros(n))


def rank_one_cfr(n=600, nu=20.0):
    t = np.arange(n) * DT
    mag = 1 + 0.2 * np.cos(2 * np.pi * nu * t)
    return cfr(mag[:, None] * np.ones((1, R.indices.size)))


@given(st.integers(0, 2**31))
def test_baseline_symmetric(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(300)
    tf = stft_real(x, P, DT)
    assert np.array_equal(tf.power[1:], tf.power[1:][::-1])


def test_baseline_constant_magnitude_is_zero():
    c = cfr(np.full((300, R.indices.size), 1 + 1j))
    tf = baseline_magnitude_stft(c, P)
    assert np.abs(tf.power).max() < 1e-20


def test_baseline_shows_both_signs():
    tf = baseline_magnitude_stft(rank_one_cfr(), P)
    col = tf.power[:, 0]
    g = tf.doppler_grid_hz
    assert abs(abs(g[np.argmax(col)]) - 20) < 1
    i_pos, i_neg = np.argmin(np.abs(g - 20)), np.argmin(np.abs(g + 20))
    assert col[i_pos] == col[i_neg]


def test_stft_real_parseval():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(256)
    p = StftParams(doppler_interp_rate=1, mean_removal=False)
    tf = stft_real(x, p, DT)
    seg = x * p.window()
    assert tf.power[:, 0].sum() == pytest.approx(p.nfft * np.sum(seg ** 2), rel=1e-12)


def test_pc_rank_and_index():
    c = rank_one_cfr()
    vals, vecs, rank = principal_components(np.abs(c.values))
    assert rank == 1 and vals[0] > 0
    assert np.all(np.diff(vals) <= 1e-12 * vals[0])
    assert np.abs(vecs[:, 0]).argmax() == vecs[:, 0].argmax()
    baseline_signal(c, "pc", 1)
    with pytest.raises(ValueError):
        baseline_signal(c, "pc", 2)
    with pytest.raises(ValueError):
        baseline_signal(c, "subcarrier", 5000)
