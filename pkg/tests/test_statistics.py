"""Tests for the statistical helpers behind Monte Carlo checks."""

import numpy as np
import pytest

from libs.statistics import (
    KsResult,
    expected_abs_normal,
    ks_against_cdf,
    ks_against_normal,
    ks_critical_value,
    ks_two_sample,
    mean_with_stderr,
    pooled_stderr,
    reflected_bm_cdf,
)


class TestKolmogorovSmirnov:
    @pytest.fixture
    def normals(self):
        return np.random.default_rng(0).standard_normal(2000)

    def test_identical_samples_pass(self, normals):
        result = ks_two_sample(normals, normals)

        assert result.statistic == 0.0
        assert result.passed

    def test_shifted_sample_fails(self, normals):
        assert not ks_two_sample(normals, normals + 1.0).passed

    def test_against_normal_scale(self, normals):
        assert not ks_against_normal(normals, scale=3.0).passed
        assert ks_against_normal(3.0 * normals, scale=3.0).statistic < 0.05

    def test_passed_uses_alpha(self):
        assert KsResult(0.1, 0.02, 0.01).passed
        assert not KsResult(0.1, 0.02, 0.05).passed

    def test_critical_value(self):
        expected = np.sqrt(-0.5 * np.log(0.005)) * np.sqrt(2.0 / 100.0)

        assert ks_critical_value(100, 100) == pytest.approx(expected)

    def test_two_sample_reports_critical_distance(self, normals):
        result = ks_two_sample(normals[:500], normals[500:])

        assert result.critical == pytest.approx(ks_critical_value(500, 1500))
        assert result.statistic < result.critical


class TestReflectedLaw:
    """Test the one-sample KS test against the reflected Brownian law."""

    @pytest.fixture
    def reflected(self):
        gen = np.random.default_rng(1)
        return np.abs(0.5 + gen.standard_normal(4000))

    def test_cdf_limits(self):
        cdf = reflected_bm_cdf(0.5, 1.0)

        assert cdf(0.0) == 0.0
        assert cdf(-1.0) == 0.0
        assert cdf(50.0) == pytest.approx(1.0)
        assert np.all(np.diff(cdf(np.linspace(0.0, 5.0, 101))) >= 0.0)

    def test_reflected_sample_passes(self, reflected):
        assert ks_against_cdf(reflected, reflected_bm_cdf(0.5, 1.0)).passed

    def test_wrong_start_fails(self, reflected):
        """Test that a sample shifted by one is rejected."""
        assert not ks_against_cdf(reflected + 1.0, reflected_bm_cdf(0.5, 1.0)).passed


class TestMeans:
    def test_mean_with_stderr(self):
        mean, stderr = mean_with_stderr([1.0, 2.0, 3.0, 4.0])

        assert mean == 2.5
        assert stderr == pytest.approx(np.std([1.0, 2.0, 3.0, 4.0], ddof=1) / 2.0)

    def test_degenerate_samples(self):
        assert mean_with_stderr([5.0]) == (5.0, 0.0)
        assert all(np.isnan(v) for v in mean_with_stderr([]))

    def test_pooled_stderr(self):
        assert pooled_stderr(3.0, 4.0) == pytest.approx(5.0)

    def test_expected_abs_normal(self):
        assert expected_abs_normal() == pytest.approx(np.sqrt(2.0 / np.pi), rel=1e-10)
