"""
mfdfa_test.py | mfkit
--------------------------------------------------------------------
Fluctuation functions against a naive reference loop, the binomial
cascade oracles for h, tau and alpha, the Gaussian control, exact
power laws and the spectrum algebra.
"""

import sys
from typing import Optional, get_type_hints

import numpy as np
import pytest

from mfkit import mfdfa
from mfkit.config import MfdfaConfig
from mfkit.errors import InputError
from mfkit.synthetic import (
    binomial_cascade, cascade_alpha_range, cascade_hurst, cascade_tau, gaussian_noise, student_t,
)

CASCADE_A = 0.75
DYADIC = tuple(2 ** k for k in range(5, 15))
# order-2 detrending biases h low below s = 256
CASCADE_FIT_MIN = 256


def _naive_surface(x, q_grid, scales, order):
    """Direct loop: polyfit per segment, forward then backward."""
    y = np.cumsum(x - np.mean(x))
    n = y.size
    out = np.empty((len(q_grid), len(scales)))
    for j, s in enumerate(scales):
        ns = n // s
        f2 = []
        for v in range(ns):
            for seg in (y[v * s:(v + 1) * s], y[n - (v + 1) * s:n - v * s]):
                t = np.arange(s)
                trend = np.polyval(np.polyfit(t, seg, order), t)
                f2.append(np.mean((seg - trend) ** 2))
        f2 = np.array(f2)
        for i, q in enumerate(q_grid):
            if q == 0:
                out[i, j] = np.exp(0.5 * np.mean(np.log(f2)))
            else:
                out[i, j] = np.mean(f2 ** (q / 2)) ** (1 / q)
    return out


@pytest.fixture(scope="module")
def cascade_spectrum():
    config = MfdfaConfig(q_grid=tuple(np.arange(-5, 5.5, 0.5)), detrend_order=2,
                         fit_range=(CASCADE_FIT_MIN, DYADIC[-1]))
    profile = mfdfa.make_profile(binomial_cascade(16, CASCADE_A))
    surface = mfdfa.fluctuation_surface(profile, config.q_array(), DYADIC, config.detrend_order)
    return mfdfa.fit_hurst(surface, config.fit_range)


def test_matches_naive_reference_loop():
    q_grid = np.array([-5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0])
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(256, 513))
        x = rng.standard_t(4, size=n)
        scales = [s for s in (10, 16, 24, 33, 50, 64, 100, 128) if s <= n // 4]
        profile = mfdfa.make_profile(x)
        surface = mfdfa.fluctuation_surface(profile, q_grid, scales, detrend_order=2)
        expected = _naive_surface(x, q_grid, scales, 2)
        np.testing.assert_allclose(surface.values, expected, rtol=1e-10, atol=0)


def test_binomial_cascade_oracle(cascade_spectrum):
    expected = cascade_hurst(cascade_spectrum.q_grid, CASCADE_A)
    assert np.max(np.abs(cascade_spectrum.h - expected)) <= 0.05


def test_cascade_q_zero_uses_log_average(cascade_spectrum):
    limit = -np.log(CASCADE_A * (1 - CASCADE_A)) / (2 * np.log(2))
    assert cascade_spectrum.at(0.0) == pytest.approx(limit, abs=0.05)


def test_gaussian_control():
    x = gaussian_noise(2 ** 16, seed=7)
    config = MfdfaConfig(q_grid=tuple(np.arange(-10, 10.5, 0.5)), scale_min=50, scale_max=4096,
                         scale_count=30, fit_range=(50, 4096))
    spectrum = mfdfa.analyze(x, config)
    assert abs(spectrum.h2 - 0.5) <= 0.03
    assert spectrum.delta_h <= 0.2


def test_threads_do_not_change_results():
    x = gaussian_noise(8192, seed=3)
    profile = mfdfa.make_profile(x)
    q = np.arange(-3.0, 4.0)
    single = mfdfa.fluctuation_surface(profile, q, [16, 32, 64, 128, 256], threads=1)
    pooled = mfdfa.fluctuation_surface(profile, q, [16, 32, 64, 128, 256], threads=3)
    assert np.array_equal(single.values, pooled.values)


def test_spectrum_algebra():
    q = np.arange(-2.0, 2.5, 0.5)
    h = 0.8 - 0.1 * q
    spectrum = mfdfa.spectrum_from_h(q, h, np.zeros_like(q), (10, 100))
    np.testing.assert_allclose(spectrum.tau, q * h - 1)
    np.testing.assert_allclose(spectrum.alpha, h - 0.1 * q)
    assert spectrum.delta_h == pytest.approx(0.4)
    assert mfdfa.delta_h(spectrum, -1.0, 1.0) == pytest.approx(0.2)


def test_scale_bounds_and_fit_requirements():
    profile = mfdfa.make_profile(gaussian_noise(400, seed=1))
    with pytest.raises(InputError):
        mfdfa.fluctuation_surface(profile, [2.0], [8, 16], detrend_order=3)
    with pytest.raises(InputError):
        mfdfa.fluctuation_surface(profile, [2.0], [16, 200])
    surface = mfdfa.fluctuation_surface(profile, [1.0, 2.0, 3.0], [10, 20, 40, 80])
    with pytest.raises(InputError, match="need at least 4"):
        mfdfa.fit_hurst(surface, (10, 40))


def test_polynomial_profile_is_degenerate():
    # linear returns -> quadratic profile, removed exactly by order-2 detrending
    x = np.linspace(0.0, 1.0, 1024)
    surface = mfdfa.fluctuation_surface(mfdfa.make_profile(x), [2.0], [16, 32, 64, 128], 2)
    assert surface.degenerate
    with pytest.raises(InputError):
        mfdfa.fit_hurst(surface)


def test_decompose_ratio_and_undefined_r():
    q = np.arange(-2.0, 3.0)
    make = lambda slope: mfdfa.spectrum_from_h(q, 0.6 - slope * q, np.zeros_like(q), (1, 2))
    report = mfdfa.decompose(make(0.1), make(0.025), make(0.01))
    assert report.delta_h_orig == pytest.approx(0.4)
    assert report.delta_h_corr == pytest.approx(0.3)
    assert report.ratio_R == pytest.approx(3.0)
    flat = mfdfa.decompose(make(0.1), make(0.0), make(0.0))
    assert not flat.r_defined


def test_cascade_tau_matches_closed_form(cascade_spectrum):
    q = cascade_spectrum.q_grid
    expected = cascade_tau(q, CASCADE_A)
    assert np.all(np.abs(cascade_spectrum.tau - expected) <= 0.05 * np.abs(q) + 1e-9)


def test_cascade_alpha_width(cascade_spectrum):
    alpha_min, alpha_max = cascade_alpha_range(CASCADE_A)
    assert alpha_max - alpha_min == pytest.approx(
        abs(np.log(CASCADE_A) - np.log(1 - CASCADE_A)) / np.log(2), rel=1e-12)
    width = np.nanmax(cascade_spectrum.alpha) - np.nanmin(cascade_spectrum.alpha)
    assert width == pytest.approx(alpha_max - alpha_min, abs=0.15)


def test_generalized_means_increase_with_q():
    profile = mfdfa.make_profile(gaussian_noise(8192, seed=11))
    surface = mfdfa.fluctuation_surface(profile, [-25.0, 0.0, 25.0], [16, 64, 256, 1024], 2)
    low, mid, high = surface.values
    assert np.all(low <= mid * (1 + 1e-12))
    assert np.all(mid <= high * (1 + 1e-12))


def test_exact_power_law_surface_gives_constant_h():
    q = np.arange(-4.0, 4.5, 0.5)
    scales = np.array([16, 32, 64, 128, 256, 512], dtype=np.int64)
    values = np.tile(3.0 * scales ** 0.5, (q.size, 1))
    surface = mfdfa.FluctuationSurface(q, scales, values, 2, 4096 // scales)
    spectrum = mfdfa.fit_hurst(surface)
    np.testing.assert_allclose(spectrum.h, 0.5, rtol=0, atol=1e-12)
    assert spectrum.delta_h == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("factor", [1e-3, 250.0])
def test_h_is_invariant_under_rescaling(factor):
    x = student_t(4096, 3, seed=8)
    config = MfdfaConfig(q_grid=tuple(np.arange(-4.0, 4.5, 1.0)), scale_min=16, scale_max=1024,
                         scale_count=12, fit_range=None)
    base = mfdfa.analyze(x, config)
    scaled = mfdfa.analyze(factor * x, config)
    np.testing.assert_allclose(scaled.h, base.h, rtol=0, atol=1e-9)


def test_surface_table_and_segment_counts():
    x = gaussian_noise(5000, seed=12)
    surface = mfdfa.fluctuation_surface(mfdfa.make_profile(x), [-1.0, 2.0], [16, 50, 300], 2)
    np.testing.assert_array_equal(surface.segment_counts, 5000 // np.array([16, 50, 300]))
    table = mfdfa.surface_table(surface)
    assert list(table.columns) == ["q", "s", "F"]
    assert list(table["s"][:3]) == [16, 50, 300]
    np.testing.assert_array_equal(table["F"].to_numpy(), surface.values.ravel())


def test_optional_fit_details_default_to_none():
    hints = get_type_hints(mfdfa.MultifractalSpectrum)
    for name in ("r_squared", "intercepts", "fitted_scales"):
        assert hints[name] == Optional[np.ndarray]
    q = np.arange(-1.0, 2.0)
    spectrum = mfdfa.spectrum_from_h(q, 0.5 - 0.1 * q, np.zeros_like(q), (10, 100))
    assert spectrum.r_squared is None and spectrum.fitted_scales is None


def test_spectrum_table_round_trip(tmp_path, cascade_spectrum):
    path = tmp_path / "spectrum.csv"
    mfdfa.spectrum_table(cascade_spectrum).to_csv(path, index=False, float_format="%.17g")
    back = mfdfa.read_spectrum_table(str(path))
    np.testing.assert_array_equal(back.h, cascade_spectrum.h)
    assert back.delta_h == pytest.approx(cascade_spectrum.delta_h)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
