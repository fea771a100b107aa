import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wifiradar.clutter import ClutterProfile, estimate_clutter, remove_clutter, residual
from wifiradar.config import RadioParams
from wifiradar.errors import ShapeError, StateError
from wifiradar.series import CirSeries

R = RadioParams()


def series(values, state="calibrated", dt=1e-3):
    values = np.asarray(values, dtype=complex)
    return CirSeries(R, np.arange(values.shape[0]) * dt,
                     np.arange(values.shape[1]) * R.delay_step_s, values, state)


def test_requires_calibrated():
    with pytest.raises(StateError):
        estimate_clutter(series(np.ones((3, 4)), "raw"))


def test_constant_series():
    v = np.tile(np.arange(5) + 1j, (7, 1))
    prof = estimate_clutter(series(v))
    assert np.allclose(prof.mean_values, v[0])
    res = residual(series(v), prof)
    assert np.abs(res.values).max() <= 1e-9 * np.abs(v).max()
    assert res.calibration_state == "residual"


def test_rotating_phasor_mean():
    t = np.arange(1000) * 1e-3
    v = np.exp(2j * np.pi * 30 * t)[:, None] * np.ones((1, 3))
    assert np.abs(estimate_clutter(series(v)).mean_values).max() < 0.01


@given(st.integers(2, 40), st.integers(1, 10), st.integers(0, 2**31))
def test_residual_zero_mean(n, m, seed):
    rng = np.random.default_rng(seed)
    v = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) * 1e3
    res, _ = remove_clutter(series(v))
    assert np.abs(res.values.mean(axis=0)).max() <= 1e-12 * np.abs(v).max()


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_residual_linear(a):
    rng = np.random.default_rng(0)
    v = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    r1, _ = remove_clutter(series(a * v))
    r2, _ = remove_clutter(series(v))
    assert np.allclose(r1.values, a * r2.values, atol=1e-9 * max(abs(a), 1))


def test_grid_mismatch():
    s = series(np.ones((3, 4)))
    bad = ClutterProfile(np.arange(5) * R.delay_step_s, np.zeros(5), 3)
    with pytest.raises(ShapeError):
        residual(s, bad)


def test_sliding_window():
    t = np.arange(200)
    v = (1 + 0.01 * t)[:, None] * np.ones((1, 2))
    prof = estimate_clutter(series(v), window=21)
    assert prof.mean_values.shape == v.shape
    # a linear drift is tracked exactly away from the edges
    assert np.allclose(prof.mean_values[20:-20], v[20:-20])
    with pytest.raises(ValueError):
        estimate_clutter(series(v), window=0)
