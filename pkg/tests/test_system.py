import math

import numpy as np
import pytest

from pixeldeblur import MeasurementWindow, PiecewiseSignal, build_system, refine, residual, simulate_response
from pixeldeblur.errors import ShapeError
from pixeldeblur.system import system_matrix

TAU = 0.011
T = 0.005


def simulated_system(rng, n_window, n, y0=None):
    times = np.arange(n_window + 1) * T
    coeffs = rng.uniform(280, 320, 1 << n)
    sig = PiecewiseSignal(0.0, times[-1], coeffs)
    y0 = coeffs[0] if y0 is None else y0
    y = simulate_response(sig, y0, TAU, times)
    return build_system(MeasurementWindow(times, y, TAU), n), sig


def test_single_interval_example():
    sys_ = build_system(MeasurementWindow([0.0, TAU], [0.0, 1.0], TAU), 0)
    assert sys_.v.shape == (1, 1)
    assert sys_.v[0, 0] == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert sys_.v[0, 0] == pytest.approx(0.632121, abs=5e-7)


def test_aligned_two_sample_example():
    v = system_matrix([0.0, TAU, 2 * TAU], TAU, 1)
    np.testing.assert_allclose(v[0], [math.exp(-1) * (math.e - 1), 0.0], atol=1e-15)
    assert v[0, 1] == 0.0
    np.testing.assert_allclose(v[1], [math.exp(-2) * (math.e - 1), math.exp(-2) * (math.e**2 - math.e)])


def test_constant_samples():
    times = np.arange(17) * T
    sys_ = build_system(MeasurementWindow(times, np.full(17, 301.5), TAU), 5)
    s = (times[1:] - times[0]) / TAU
    np.testing.assert_allclose(sys_.y, 301.5 * (1 - np.exp(-s)), rtol=1e-13)
    assert np.max(np.abs(residual(sys_, np.full(32, 301.5)))) <= 1e-12 * 301.5


@pytest.mark.parametrize("n_window", [16, 17])
@pytest.mark.parametrize("n", range(8))
def test_round_trip_and_row_sums(rng, n_window, n):
    for _ in range(5):
        sys_, sig = simulated_system(rng, n_window, n, y0=rng.uniform(280, 320))
        r = residual(sys_, sig.coeffs)
        assert np.max(np.abs(r)) <= 1e-9 * np.max(np.abs(sys_.y))
        s = np.arange(1, n_window + 1) * T / TAU
        np.testing.assert_allclose(sys_.v.sum(axis=1), -np.expm1(-s), rtol=1e-10, atol=0)
        assert sys_.v.min() >= 0 and sys_.v.max() <= 1


def test_nonuniform_times(rng):
    times = np.sort(rng.uniform(0, 0.08, 12))
    times[0] = 0.0
    sig = PiecewiseSignal(0.0, times[-1], rng.uniform(290, 310, 64))
    y = simulate_response(sig, 300.0, TAU, times)
    sys_ = build_system(MeasurementWindow(times, y, TAU), 6)
    assert np.max(np.abs(residual(sys_, sig.coeffs))) <= 1e-9 * np.max(np.abs(y))


def test_refinement_consistency(rng):
    times = np.arange(17) * T
    y = rng.uniform(290, 310, 17)
    w = MeasurementWindow(times, y, TAU)
    a = PiecewiseSignal(0.0, times[-1], rng.uniform(290, 310, 16))
    for n in range(4, 8):
        coarse = residual(build_system(w, n), a.coeffs)
        a = refine(a)
        fine = residual(build_system(w, n + 1), a.coeffs)
        np.testing.assert_allclose(fine, coarse, rtol=0, atol=1e-10 * np.abs(y).max())


def test_causality_zero_pattern():
    times = np.arange(18) * T
    v = system_matrix(times, TAU, 7)
    edges = np.arange(128) * (times[-1] / 128)
    for j in range(17):
        future = edges >= times[j + 1]
        assert np.all(v[j, future] == 0.0)
        assert np.all(v[j, ~future] > 0.0)


def test_residual_examples(rng):
    sys_, sig = simulated_system(rng, 16, 4)
    np.testing.assert_array_equal(residual(sys_, np.zeros(16)), -sys_.y)
    a = rng.normal(size=16)
    d = np.zeros(16)
    d[5] = 0.25
    np.testing.assert_allclose(residual(sys_, a + d) - residual(sys_, a), 0.25 * sys_.v[:, 5], atol=1e-13)
    with pytest.raises(ShapeError):
        residual(sys_, np.zeros(15))


def test_long_window_no_overflow():
    # s_j reaches 5000; unfolded exponentials would overflow
    times = np.linspace(0, 55.0, 9)
    v = system_matrix(times, TAU, 6)
    assert np.all(np.isfinite(v))
    np.testing.assert_allclose(v.sum(axis=1), 1.0, rtol=1e-12)
