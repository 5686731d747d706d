"""Gaussian mechanism: calibration formula, determinism, noise moments."""

from decimal import Decimal, getcontext

import numpy as np
import pytest

from pqfl.privacy import DpConfig, InvalidBudget, add_dp_noise, calibrate_sigma


def high_precision_sigma(epsilon: str, delta: str, clip: str) -> float:
    """Independent evaluation of clip * sqrt(2 ln(1.25/delta)) / eps."""
    getcontext().prec = 50
    eps, dlt, c = Decimal(epsilon), Decimal(delta), Decimal(clip)
    inner = (Decimal("1.25") / dlt).ln() * 2
    return float(c * inner.sqrt() / eps)


class TestCalibration:
    def test_reference_point(self):
        expect = high_precision_sigma("2.0", "1e-5", "1.0")
        assert expect == pytest.approx(2.42240, abs=1e-4)
        assert calibrate_sigma(2.0, 1e-5, 1.0) == pytest.approx(expect, abs=1e-12)

    def test_zero_clip_gives_zero_sigma(self):
        assert calibrate_sigma(2.0, 1e-5, 0.0) == 0.0

    def test_linear_in_clip(self):
        one = calibrate_sigma(2.0, 1e-5, 1.0)
        assert calibrate_sigma(2.0, 1e-5, 2.0) == pytest.approx(2 * one)

    def test_strictly_decreasing_in_epsilon(self):
        grid = [0.1, 0.5, 1.0, 2.0, 8.0]
        sigmas = [calibrate_sigma(e, 1e-5, 1.0) for e in grid]
        assert all(a > b for a, b in zip(sigmas, sigmas[1:]))

    def test_increasing_in_clip(self):
        grid = [0.0, 0.5, 1.0, 4.0]
        sigmas = [calibrate_sigma(2.0, 1e-5, c) for c in grid]
        assert all(a < b for a, b in zip(sigmas, sigmas[1:]))

    @pytest.mark.parametrize(
        "eps,delta,clip", [(0.0, 1e-5, 1.0), (-1.0, 1e-5, 1.0), (2.0, 0.0, 1.0),
                           (2.0, 1.0, 1.0), (2.0, 1e-5, -1.0)]
    )
    def test_invalid_budget(self, eps, delta, clip):
        with pytest.raises(InvalidBudget):
            calibrate_sigma(eps, delta, clip)


class TestNoise:
    def test_zero_sigma_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(add_dp_noise(v, 0.0, seed=1), v)

    def test_deterministic_per_seed(self):
        v = np.zeros(16)
        assert np.array_equal(add_dp_noise(v, 1.0, seed=5), add_dp_noise(v, 1.0, seed=5))
        assert not np.array_equal(add_dp_noise(v, 1.0, seed=5), add_dp_noise(v, 1.0, seed=6))

    def test_empirical_moments(self):
        n = 1_000_000
        sigma = 2.42240
        noise = add_dp_noise(np.zeros(n), sigma, seed=7)
        assert abs(noise.mean()) < 4 * sigma / np.sqrt(n)
        assert noise.var() == pytest.approx(sigma**2, rel=0.01)

    def test_distinct_client_round_streams_are_uncorrelated(self):
        n = 100_000
        a = add_dp_noise(np.zeros(n), 1.0, seed=(42, 0, 3))
        b = add_dp_noise(np.zeros(n), 1.0, seed=(42, 1, 3))
        c = add_dp_noise(np.zeros(n), 1.0, seed=(42, 0, 4))
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
        assert abs(np.corrcoef(a, c)[0, 1]) < 0.01


def test_config_validation():
    DpConfig(epsilon=2.0, delta=1e-5).validate()
    with pytest.raises(InvalidBudget):
        DpConfig(epsilon=0.0).validate()
    with pytest.raises(InvalidBudget):
        DpConfig(delta=1.5).validate()
