import math

import numpy as np
import pytest

from zfepr.hamiltonians import TargetSpec
from zfepr.noise import (
    FWHM_PER_SIGMA,
    NoiseModel,
    frequency_histogram,
    linewidth_stats,
    sample_noise,
)


def test_sample_noise_zero_width():
    model = NoiseModel(0.0, 0.0, 0.0, seed=1)
    assert np.abs(sample_noise(model, 50)).max() == 0.0


def test_sample_noise_moments():
    model = NoiseModel.isotropic(0.5, seed=2)
    draws = sample_noise(model, 10000)
    assert np.abs(draws.mean(axis=0)).max() < 4 * 0.5 / math.sqrt(10000)
    assert np.abs(draws.std(axis=0) / 0.5 - 1.0).max() < 0.05


def test_sample_noise_deterministic_and_chunkable():
    model = NoiseModel(0.1, 0.2, 0.3, seed=99)
    bulk = sample_noise(model, 20)
    assert np.array_equal(bulk, sample_noise(model, 20))
    head = sample_noise(model, 8)
    tail = sample_noise(model, 12, start=8)
    assert np.array_equal(bulk, np.vstack([head, tail]))
    other = NoiseModel(0.1, 0.2, 0.3, seed=100)
    assert not np.array_equal(bulk, sample_noise(other, 20))


def test_sample_noise_anisotropic_scaling():
    model = NoiseModel(0.0, 1.0, 3.0, seed=4)
    draws = sample_noise(model, 5000)
    assert np.abs(draws[:, 0]).max() == 0.0
    assert draws[:, 2].std() / draws[:, 1].std() == pytest.approx(3.0, rel=0.1)


def test_linewidth_stats_paper_point(spec):
    stats = linewidth_stats(0.196, spec)
    assert stats.sigma_st1_mhz == 0.098
    assert stats.sigma_st0_mhz == pytest.approx(7.3464e-4, rel=1e-3)
    assert abs(stats.chi - 133.0) <= 5.0  # consistent with the reported ~130


def test_linewidth_stats_zero_noise(spec):
    stats = linewidth_stats(0.0, spec)
    assert stats.sigma_st1_mhz == 0.0
    assert stats.sigma_st0_mhz == 0.0
    assert math.isinf(stats.chi)
    with pytest.raises(ValueError):
        linewidth_stats(-0.1, spec)


def test_chi_scale_covariance(spec):
    # chi carries a 1/sigma prefactor: chi * sigma is scale-invariant
    sigmas = np.array([0.05, 0.1, 0.2, 0.4])
    products = np.array([linewidth_stats(s, spec).chi * s for s in sigmas])
    assert np.abs(products / products[0] - 1.0).max() < 1e-12


def test_histogram_degenerate(spec):
    model = NoiseModel(0.0, 0.0, 0.0, seed=1)
    hist = frequency_histogram(model, spec, "st0", 2000)
    assert hist.std == 0.0
    assert hist.mean == 0.0
    assert hist.skewness == 0.0 and hist.excess_kurtosis == 0.0


def test_histogram_st0_asymmetric_sharp(spec):
    model = NoiseModel.isotropic(2.3, seed=6)
    hist = frequency_histogram(model, spec, "st0", 100000)
    assert abs(hist.skewness) > 0.1
    assert hist.excess_kurtosis > 0.0


def test_histogram_st1_gaussian(spec):
    sigma = 1.0
    model = NoiseModel.isotropic(sigma, seed=7)
    hist = frequency_histogram(model, spec, "st1", 100000)
    assert abs(hist.skewness) < 0.05
    assert hist.std == pytest.approx(sigma / 2, rel=0.02)


def test_histogram_st0_mean_matches_analytic_moments(spec):
    # analytic first moment of the quadratic form
    sigma = 0.5
    model = NoiseModel.isotropic(sigma, seed=8)
    n = 200000
    hist = frequency_histogram(model, spec, "st0", n)
    ap, al = spec.a_perp_mhz, spec.a_par_mhz
    mean = -2 * sigma**2 * ap / (al**2 - ap**2) + sigma**2 / (2 * ap)
    se = hist.std / math.sqrt(n)
    assert abs(hist.mean - mean) < 5 * se


def test_histogram_validation(spec):
    model = NoiseModel.isotropic(1.0, seed=1)
    with pytest.raises(ValueError):
        frequency_histogram(model, spec, "st0", 100)
    with pytest.raises(ValueError):
        frequency_histogram(model, spec, "st7", 2000)


def test_fwhm_constant():
    assert FWHM_PER_SIGMA == pytest.approx(math.sqrt(8 * math.log(2)))
