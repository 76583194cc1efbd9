"""
stats_test.py | mfkit
--------------------------------------------------------------------
ACF, power-law fits, moments by sampling period and the return
histogram.
"""

import sys

import numpy as np
import pytest

from mfkit import stats
from mfkit.errors import InputError
from mfkit.ingest import ReturnSeries
from mfkit.synthetic import ar1, gaussian_noise, price_path, student_t


def _series(values) -> ReturnSeries:
    values = np.asarray(values, float)
    return ReturnSeries(values, np.arange(values.size) * 60, 60, 60)


def test_acf_lag_zero_and_white_noise_band():
    r = _series(gaussian_noise(20000, seed=1))
    a = stats.acf(r, 50)
    assert a.values[0] == 1.0
    assert np.all(np.abs(a.values[1:]) < 4 / np.sqrt(20000))
    assert np.all(np.abs(a.values) <= 1.0)


def test_acf_of_absolute_returns_label():
    a = stats.acf(_series(gaussian_noise(1000, seed=2)), 10, absolute=True)
    assert a.absolute and a.series_label.startswith("|")


def test_acf_rejects_long_lags_and_constant_series():
    with pytest.raises(InputError):
        stats.acf(_series(gaussian_noise(100)), 50)
    with pytest.raises(InputError):
        stats.acf(_series(np.ones(100)), 5)


def test_power_law_fit_recovers_exponent():
    lags = np.arange(101)
    values = np.where(lags == 0, 1.0, 0.3 * np.maximum(lags, 1) ** -0.16)
    a = stats.AcfResult(lags, values, "synthetic", absolute=True)
    fit = stats.fit_power_law_acf(a, (1, 100))
    assert fit.exponent == pytest.approx(0.16, abs=1e-10)
    assert fit.amplitude == pytest.approx(0.3, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)


def test_power_law_fit_names_non_positive_lag():
    lags = np.arange(11)
    values = np.array([1, 0.5, 0.3, 0.2, -0.01, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1])
    with pytest.raises(InputError, match="lag 4"):
        stats.fit_power_law_acf(stats.AcfResult(lags, values, "x"), (1, 10))


def test_gaussian_moments():
    skew, kurt = stats.sample_moments(gaussian_noise(200000, seed=4))
    assert abs(skew) < 0.03
    assert kurt == pytest.approx(3.0, abs=0.05)


def test_bootstrap_errors_are_positive_and_seeded():
    x = student_t(5000, 5, seed=1)
    first = stats.block_bootstrap_moments(x, resamples=200, seed=3)
    assert first == stats.block_bootstrap_moments(x, resamples=200, seed=3)
    assert all(se > 0 for se in first)


def test_moment_scan_flags_short_series():
    p = price_path(student_t(3000, 4, seed=5) * 0.001)
    scan = stats.moment_scan(p, [60, 600, 6000], resamples=50, seed=1)
    assert list(scan.counts) == [3000, 299, 29]
    assert list(scan.reliable) == [True, True, False]
    assert scan.kurtosis[0] > 3.0


def test_histogram_is_a_density():
    r = _series(gaussian_noise(50000, seed=6))
    centers, density, gaussian = stats.return_histogram(r, bins=101, span=5.0)
    width = centers[1] - centers[0]
    assert np.sum(density) * width == pytest.approx(1.0, abs=1e-3)
    assert np.max(np.abs(density - gaussian)) < 0.05


def test_acf_of_alternating_series():
    n = 1000
    a = stats.acf(_series(np.tile([1.0, -1.0], n // 2)), 5)
    assert a.values[1] == pytest.approx(-(n - 1) / n, abs=1e-9)
    assert a.values[2] == pytest.approx((n - 2) / n, abs=1e-9)


def test_acf_of_ar1_first_lag():
    a = stats.acf(_series(ar1(100_000, 0.5, seed=3)), 10)
    assert a.values[1] == pytest.approx(0.5, abs=0.02)


def test_moments_under_affine_maps():
    x = gaussian_noise(5000, seed=10) ** 2
    skew, kurt = stats.sample_moments(x)
    assert skew > 0
    moved = stats.sample_moments(4.0 * x - 7.0)
    assert moved == pytest.approx((skew, kurt), rel=1e-8)
    flipped = stats.sample_moments(-2.5 * x + 1.0)
    assert flipped == pytest.approx((-skew, kurt), rel=1e-8)


def test_two_point_returns_have_unit_kurtosis():
    skew, kurt = stats.sample_moments(np.tile([0.01, -0.01], 500))
    assert skew == pytest.approx(0.0, abs=1e-10)
    assert kurt == pytest.approx(1.0, rel=1e-10)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
