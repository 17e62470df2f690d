#!/usr/bin/env python3
"""
test_estimators.py - Tests for replica estimators and bound checks

Tests for:
- Verdict helpers and Wilson intervals
- EstimateSeries validation
- Parallel replica execution
- m-scans, D variance reports and covariance reports
- Decay fits and the conditional variance bound

Run with:
    pytest tests/test_estimators.py -v
"""

import math

import numpy as np
import pytest

from rfim_lab.disorder import DisorderParams
from rfim_lab.errors import DomainError
from rfim_lab.estimators import (
    EstimateSeries,
    Verdict,
    check_lower,
    check_upper,
    covariance_bounds,
    decay_fit,
    estimate_m,
    inconclusive,
    m_scan,
    proxy_box,
    var_bound_report,
    variance_D,
    wilson_interval,
)
from rfim_lab.lattice import ORIGIN, CouplingSpec, Site, ball
from rfim_lab.replicas import run_replicas


def _square(index):
    return index * index


def _fails_on_odd(index):
    if index % 2:
        raise ValueError(f"odd index {index}")
    return index


# =============================================================================
# Verdicts
# =============================================================================


class TestChecks:
    """Tests for check_upper, check_lower and inconclusive."""

    def test_upper_within_error(self):
        """Test that a violation smaller than 3 sigma still passes."""
        assert check_upper("x", 1.2, 1.0, 0.1).verdict == Verdict.PASS
        assert check_upper("x", 1.4, 1.0, 0.1).verdict == Verdict.FAIL
        assert check_upper("x", 0.5, 1.0).margin == pytest.approx(0.5)

    def test_lower(self):
        """Test the lower-bound direction."""
        check = check_lower("y", 0.9, 1.0, 0.05)
        assert check.verdict == Verdict.PASS
        assert check.margin == pytest.approx(-0.1)
        assert check_lower("y", 0.5, 1.0, 0.05).verdict == Verdict.FAIL

    def test_inconclusive_and_dict(self):
        """Test the inconclusive verdict and its serialized form."""
        check = inconclusive("z", 3.0, 2.0, "outside regime")
        data = check.to_dict()
        assert data["verdict"] == "INCONCLUSIVE"
        assert data["note"] == "outside regime"
        assert data["margin"] == pytest.approx(-1.0)


class TestWilsonInterval:
    """Tests for the Wilson score interval."""

    def test_contains_proportion(self):
        """Test that the interval brackets the observed proportion."""
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi

    def test_extremes(self):
        """Test zero successes and zero trials."""
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0 and 0.0 < hi < 0.1
        assert wilson_interval(0, 0) == (0.0, 1.0)

    def test_wider_with_z(self):
        """Test that a larger z widens the interval."""
        narrow = wilson_interval(10, 40)
        wide = wilson_interval(10, 40, z=3.0)
        assert wide[0] < narrow[0] and wide[1] > narrow[1]


# =============================================================================
# Series
# =============================================================================


class TestEstimateSeries:
    """Tests for EstimateSeries."""

    def test_needs_two_replicas(self, nn, ground):
        """Test that a single-replica series is rejected."""
        with pytest.raises(DomainError):
            EstimateSeries("m", (1,), np.array([0.5]), np.array([0.1]), (1,), ground, nn, 0)

    def test_negative_error_rejected(self, nn, ground):
        """Test that negative standard errors are rejected."""
        with pytest.raises(DomainError):
            EstimateSeries.synthetic([1, 2], [0.5, 0.4], ground, nn, std_error=[0.1, -0.1])

    def test_rows(self, nn, ground):
        """Test row export and lookups."""
        series = EstimateSeries.synthetic([1, 2, 4], [0.9, 0.7, 0.5], ground, nn)
        rows = series.to_rows()
        assert [r["scale"] for r in rows] == [1, 2, 4]
        assert rows[1]["mean"] == pytest.approx(0.7)
        assert series.value_at(4) == pytest.approx(0.5)


# =============================================================================
# Replica runner
# =============================================================================


class TestReplicas:
    """Tests for run_replicas."""

    def test_index_order(self):
        """Test that values come back in index order."""
        batch = run_replicas(_square, 6, start=2)
        assert batch.values == [4, 9, 16, 25, 36, 49]
        assert batch.indices == [2, 3, 4, 5, 6, 7]

    def test_failures_recorded(self):
        """Test that a raising replica is recorded, not propagated."""
        batch = run_replicas(_fails_on_odd, 5)
        assert batch.values == [0, 2, 4]
        assert [i for i, _ in batch.failed] == [1, 3]
        assert batch.failed[0][1].startswith("ValueError")
        assert len(batch) == 5

    def test_threads_do_not_change_results(self):
        """Test that a process pool returns the same values as inline execution."""
        assert run_replicas(_square, 20, threads=2).values == run_replicas(_square, 20).values


# =============================================================================
# Order parameter
# =============================================================================


class TestMScan:
    """Tests for m_scan and estimate_m."""

    def test_ground_state_scan(self, nn, ground):
        """Test a small T = 0 scan: values in [0, 1], non-increasing per replica."""
        series = m_scan([0, 1, 2, 3], ground, nn, replicas=30, base_seed=3)
        assert series.per_replica.shape == (30, 4)
        assert set(np.unique(series.per_replica)) <= {0.0, 1.0}
        assert series.monotone_violations == 0
        assert np.all(np.diff(series.mean) <= 1e-12)
        assert series.failed == ()

    def test_deterministic(self, nn, ground):
        """Test that the same seed gives identical replicas, inline or pooled."""
        a = m_scan([1, 2], ground, nn, replicas=10, base_seed=7)
        b = m_scan([1, 2], ground, nn, replicas=10, base_seed=7, threads=2)
        assert np.array_equal(a.per_replica, b.per_replica)

    def test_positive_temperature(self, nn, hot):
        """Test an exact T > 0 scan stays in [0, 1]."""
        series = m_scan([1, 2], hot, nn, replicas=5, base_seed=1)
        assert np.all(series.per_replica >= -1e-12)
        assert np.all(series.per_replica <= 1.0 + 1e-12)

    def test_invalid_arguments(self, nn, ground):
        """Test bad L lists and replica counts."""
        with pytest.raises(DomainError):
            m_scan([2, 1], ground, nn, replicas=5, base_seed=0)
        with pytest.raises(DomainError):
            m_scan([], ground, nn, replicas=5, base_seed=0)
        with pytest.raises(DomainError):
            m_scan([1], ground, nn, replicas=1, base_seed=0)

    def test_estimate_m_interval(self, nn, ground):
        """Test that a T = 0 estimate carries a Wilson interval."""
        estimate = estimate_m(1, ground, nn, replicas=20, base_seed=2)
        assert estimate.replicas == 20
        lo, hi = estimate.interval
        assert lo <= estimate.mean <= hi


# =============================================================================
# Variance and covariance
# =============================================================================


class TestVarianceD:
    """Tests for variance_D."""

    def test_report(self, nn, ground):
        """Test the structure of a T = 0 variance report."""
        report = variance_D(1, ground, nn, replicas=100, base_seed=5)
        assert report.replicas == 100
        assert report.mean_D >= 0.0
        assert report.var_D >= 0.0
        assert report.se_mean_D == pytest.approx(math.sqrt(report.var_D / 100))
        assert not math.isnan(report.mean_B.mean)
        names = [c.name for c in report.checks]
        assert "E(D) >= |Lambda(l)| m(4l)" in names
        assert "E(B) <= 2J |dv Lambda(2l)| m(l-1)" in names
        if not report.degenerate:
            assert 0.0 <= report.anti_concentration.mean <= 1.0

    def test_zero_disorder_is_degenerate(self, nn):
        """Test that a strong uniform field without disorder gives D = 0."""
        params = DisorderParams(10.0, 0.0, 0.0)
        report = variance_D(1, params, nn, replicas=100, base_seed=0)
        assert report.degenerate
        assert report.chi_bound is None
        assert report.checks[0].verdict == Verdict.INCONCLUSIVE

    def test_needs_replicas(self, nn, ground):
        """Test the 100-replica minimum."""
        with pytest.raises(DomainError):
            variance_D(1, ground, nn, replicas=50, base_seed=0)


class TestCovariance:
    """Tests for covariance_bounds."""

    def test_proxy_box(self, nn):
        """Test that the proxy contains ball(u, l) and v."""
        u, v = ORIGIN, Site(5, 0)
        proxy = proxy_box(u, v, 2, nn)
        assert ball(u, 2).issubset(proxy)
        assert v in proxy
        assert proxy.radius >= 4 * (2 * 2 + 1)

    def test_ground_state_report(self, nn, ground):
        """Test a small T = 0 report with both checks evaluated."""
        report = covariance_bounds(ORIGIN, Site(3, 0), 1, ground, nn, replicas=20, base_seed=1)
        assert len(report.checks) == 2
        assert report.checks[1].verdict != Verdict.INCONCLUSIVE
        assert report.truncated.replicas == 20
        assert report.proxy["kind"] == "box"

    def test_close_sites_inconclusive(self, nn, ground):
        """Test that d(u,v) < 2l + R leaves the covariance check inconclusive."""
        report = covariance_bounds(ORIGIN, Site(3, 0), 2, ground, nn, replicas=5, base_seed=1)
        assert report.checks[1].verdict == Verdict.INCONCLUSIVE

    def test_too_close(self, nn, ground):
        """Test that d(u,v) <= l raises."""
        with pytest.raises(DomainError):
            covariance_bounds(ORIGIN, Site(1, 0), 1, ground, nn, replicas=5)


# =============================================================================
# Fits
# =============================================================================


class TestDecayFit:
    """Tests for decay_fit."""

    def test_exponential_data(self, nn, ground):
        """Test that exact exponential decay is preferred and significant."""
        scales = [1, 2, 3, 4, 5, 6]
        series = EstimateSeries.synthetic(scales, [0.8 * math.exp(-0.3 * L) for L in scales], ground, nn)
        fit = decay_fit(series)
        assert fit.exp_slope == pytest.approx(-0.3)
        assert fit.preferred == "exponential"
        assert fit.exp_decay_significant
        assert fit.gamma_reference is not None

    def test_power_data(self, nn, ground):
        """Test that a power law is preferred for power-law data."""
        scales = [1, 2, 4, 8, 16]
        series = EstimateSeries.synthetic(scales, [L ** -0.5 for L in scales], ground, nn)
        fit = decay_fit(series)
        assert fit.power_slope == pytest.approx(-0.5)
        assert fit.preferred == "power"

    def test_excludes_zeros(self, ground):
        """Test that zero means are dropped and too few scales raise."""
        coupling = CouplingSpec.isotropic(1.0, 2)
        series = EstimateSeries.synthetic([1, 2, 3, 4, 5], [0.5, 0.4, 0.3, 0.2, 0.0], ground, coupling)
        fit = decay_fit(series)
        assert fit.excluded == (5,)
        assert fit.gamma_reference is None
        short = EstimateSeries.synthetic([1, 2, 3, 4], [0.5, 0.4, 0.0, 0.0], ground, coupling)
        with pytest.raises(DomainError):
            decay_fit(short)


class TestVarianceBound:
    """Tests for var_bound_report."""

    def test_passes_under_hypotheses(self, nn, ground):
        """Test PASS for slowly decaying m and a small variance ratio."""
        series = EstimateSeries.synthetic([1, 2, 3, 4], [0.9] * 4, ground, nn)
        report = var_bound_report(series, 1, 0.25, mean_D=10.0, var_D=1.0)
        assert report.hypotheses_hold
        assert report.ratio == pytest.approx(0.01)
        assert all(c.verdict == Verdict.PASS for c in report.checks)

    def test_exceeded_is_inconclusive(self, nn, ground):
        """Test that an exceeded bound is INCONCLUSIVE, never FAIL."""
        series = EstimateSeries.synthetic([1, 2, 3, 4], [0.9] * 4, ground, nn)
        report = var_bound_report(series, 1, 0.25, mean_D=1.0, var_D=1e6)
        assert all(c.verdict == Verdict.INCONCLUSIVE for c in report.checks)
        assert report.note

    def test_missing_scales(self, nn, ground):
        """Test that gaps in the series make the hypotheses unverifiable."""
        series = EstimateSeries.synthetic([1, 2, 4], [0.9] * 3, ground, nn)
        report = var_bound_report(series, 1, 0.2, mean_D=1.0, var_D=0.1)
        assert not report.hypotheses_hold
        assert "unverifiable" in report.note

    def test_alpha_range(self, nn, ground):
        """Test that alpha must lie in (0, 1/4]."""
        series = EstimateSeries.synthetic([1, 2, 3, 4], [0.9] * 4, ground, nn)
        with pytest.raises(DomainError):
            var_bound_report(series, 1, 0.3, mean_D=1.0, var_D=0.1)
