import math

import numpy as np
import pytest

from cqec.core import RngStream
from cqec.noise import NoiseModel, ar_extension, correlated_noise_step, generate_noise

V = 5.94
LAGS = (0.61, 0.25, 0.10, 0.05)


def test_white_model():
    m = NoiseModel(V)
    assert m.depth == 0
    assert m.conditional_var(0) == V


def test_lag1_conditional_moments():
    m = NoiseModel(V, (0.61,))
    assert m.weights[1][0] == pytest.approx(0.61)
    assert m.conditional_var(1) == pytest.approx(V * (1 - 0.61 ** 2))
    assert m.conditional_var(1) == pytest.approx(3.729, abs=2e-3)


def test_invalid_covariance_rejected():
    with pytest.raises(ValueError):
        NoiseModel(V, (0.99, 0.0))


def test_conditional_mean_growing_history():
    m = NoiseModel(V, LAGS)
    h = np.array([1.2, -0.4, 0.3])
    assert m.conditional_mean(h) == pytest.approx(float(h @ m.weights[3]))
    assert m.conditional_mean(np.zeros(0)) == 0.0


def test_correlated_noise_step_statistics():
    m = NoiseModel(V, (0.61,))
    rng = RngStream(5).generator()
    h = 2.0
    draws = np.array([correlated_noise_step([h], m, rng) for _ in range(40_000)])
    assert draws.mean() == pytest.approx(0.61 * h, abs=0.05)
    assert draws.var() == pytest.approx(V * (1 - 0.61 ** 2), rel=0.05)
    unconditional = np.array([correlated_noise_step([], m, rng)
                              for _ in range(40_000)])
    assert unconditional.mean() == pytest.approx(0.0, abs=0.05)
    assert unconditional.var() == pytest.approx(V, rel=0.05)


def _empirical_autocov(x, lag):
    return float(np.mean(x[lag:] * x[:-lag])) if lag else float(np.mean(x * x))


def test_generated_noise_autocovariance():
    m = NoiseModel(V, LAGS)
    n = 10 ** 6
    rng = RngStream(17).generator()
    x = generate_noise(m, rng.standard_normal(n))
    # Bartlett-style standard error, inflated for the correlated samples.
    se = V * math.sqrt(3.0 / n)
    assert abs(_empirical_autocov(x, 0) - V) < 3 * V * math.sqrt(2.0 / n) * 1.5
    for lag in range(1, 5):
        assert abs(_empirical_autocov(x, lag) - V * LAGS[lag - 1]) < 3 * se
    # Beyond the configured depth the stationary AR recursion keeps small
    # but nonzero covariances; they must match the implied extension and
    # stay well below the configured lags.
    implied = ar_extension(m, 8)
    for lag in range(5, 9):
        assert abs(_empirical_autocov(x, lag) - implied[lag]) < 3 * se
        assert abs(implied[lag]) < 0.05 * V


def test_generate_noise_deterministic():
    m = NoiseModel(V, LAGS)
    innov = RngStream(3).generator().standard_normal((4, 100))
    assert np.array_equal(generate_noise(m, innov), generate_noise(m, innov))
