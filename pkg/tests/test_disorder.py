#!/usr/bin/env python3
"""
test_disorder.py - Tests for random fields and Gaussian tails

Tests for:
- Keyed generator determinism and sitewise consistency
- FieldSample immutability, restriction and shifts
- chi / chi_inverse / gamma_exponent
- DisorderParams validation

Run with:
    pytest tests/test_disorder.py -v
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rfim_lab.disorder import (
    DisorderParams,
    FieldSample,
    block_sum,
    chi,
    chi_inverse,
    constant_field,
    gamma_exponent,
    hat_eta,
    keyed_uniform,
    phi,
    replica_seed,
    sample_field,
    scaled_field,
    shift_field,
)
from rfim_lab.errors import DomainError
from rfim_lab.lattice import ORIGIN, Site, ball, box


# =============================================================================
# Keyed generator
# =============================================================================


class TestKeyedGenerator:
    """Tests for keyed uniforms and replica seeds."""

    def test_uniform_range(self):
        """Test that keyed uniforms lie strictly inside (0, 1)."""
        u = keyed_uniform(1, 2, np.arange(10000))
        assert u.shape == (10000,)
        assert np.all(u > 0.0) and np.all(u < 1.0)

    def test_uniform_is_pure(self):
        """Test that the same keys give the same value."""
        assert keyed_uniform(3, 4, 5) == keyed_uniform(3, 4, 5)
        assert keyed_uniform(3, 4, 5) != keyed_uniform(3, 5, 4)

    def test_broadcasting(self):
        """Test that array keys broadcast like numpy arrays."""
        xs = np.arange(4)
        grid = keyed_uniform(9, xs[:, None], xs[None, :])
        assert grid.shape == (4, 4)
        assert grid[1, 2] == keyed_uniform(9, 1, 2)

    def test_draw_order_irrelevant(self):
        """Test that a site's value does not depend on which other sites are drawn with it."""
        xs = np.array([40, -3, 17, 0, 1000])
        together = keyed_uniform(11, xs, -xs)
        reversed_draw = keyed_uniform(11, xs[::-1], -xs[::-1])[::-1]
        np.testing.assert_array_equal(together, reversed_draw)
        assert together[2] == keyed_uniform(11, 17, -17)

    def test_replica_seeds_distinct(self):
        """Test that replica seeds do not collide on a small range."""
        seeds = {replica_seed(0, i) for i in range(5000)}
        assert len(seeds) == 5000

    def test_uniform_distribution(self):
        """Test that keyed uniforms pass a KS test."""
        u = keyed_uniform(0x1234, np.arange(20000))
        assert stats.kstest(u, "uniform").pvalue > 1e-4


# =============================================================================
# Field samples
# =============================================================================


class TestFieldSample:
    """Tests for FieldSample and sample_field."""

    def test_sitewise_consistency(self):
        """Test that overlapping regions agree on shared sites."""
        seed = replica_seed(7, 3)
        big = sample_field(ball(ORIGIN, 5), seed)
        small = sample_field(box(-1, -1, 3), seed)
        for site in box(-1, -1, 3).sites:
            assert big.value(site) == small.value(site)

    def test_seeds_differ(self):
        """Test that different seeds give different fields."""
        region = ball(ORIGIN, 3)
        a = sample_field(region, 1).values
        b = sample_field(region, 2).values
        assert not np.array_equal(a, b)

    def test_gaussian_marginals(self):
        """Test that field values look standard normal."""
        field = sample_field(box(0, 0, 120), replica_seed(11, 0))
        assert abs(field.values.mean()) < 0.05
        assert abs(field.values.std() - 1.0) < 0.05
        assert stats.kstest(field.values, "norm").pvalue > 1e-4

    def test_values_read_only(self):
        """Test that field values cannot be modified in place."""
        field = sample_field(ball(ORIGIN, 1), 5)
        with pytest.raises(ValueError):
            field.values[0] = 1.0

    def test_caller_array_untouched(self):
        """Test that building a FieldSample does not freeze the caller's array."""
        values = np.zeros(5)
        FieldSample(ball(ORIGIN, 1), values, 0)
        values[0] = 1.0
        assert values[0] == 1.0

    def test_shape_mismatch(self):
        """Test that a wrong number of values is rejected."""
        with pytest.raises(DomainError):
            FieldSample(ball(ORIGIN, 1), np.zeros(4), 0)

    def test_restriction_order(self):
        """Test that on() returns values in the sub-region's order."""
        field = sample_field(ball(ORIGIN, 2), 9)
        inner = ball(ORIGIN, 1)
        expected = [field.value(s) for s in inner.sites]
        assert np.array_equal(field.on(inner), expected)

    def test_restriction_outside(self):
        """Test that on() refuses regions outside the field."""
        field = sample_field(ball(ORIGIN, 1), 9)
        with pytest.raises(DomainError):
            field.on(ball(ORIGIN, 2))
        with pytest.raises(DomainError):
            field.value(Site(5, 5))

    def test_shift_field(self):
        """Test that shift_field adds t on the inner sites only."""
        field = sample_field(ball(ORIGIN, 2), 4)
        inner = ball(ORIGIN, 1)
        shifted = shift_field(field, inner, 0.75)
        for site in ball(ORIGIN, 2).sites:
            delta = shifted.value(site) - field.value(site)
            assert delta == pytest.approx(0.75 if site in inner else 0.0)
        assert shifted.seed == field.seed

    def test_hat_eta_and_block_sum(self):
        """Test the normalized and plain block sums on a constant field."""
        region = ball(ORIGIN, 2)
        field = constant_field(region, 0.5)
        assert hat_eta(field, region) == pytest.approx(0.5 * math.sqrt(13))
        assert block_sum(field, ball(ORIGIN, 1).sites) == pytest.approx(2.5)

    def test_empty_region_rejected(self):
        """Test that sampling an empty region raises."""
        from rfim_lab.lattice import custom_region

        with pytest.raises(DomainError):
            sample_field(custom_region([]), 0)


# =============================================================================
# Tail functions
# =============================================================================


class TestTailFunctions:
    """Tests for phi, chi and related functions."""

    def test_chi_values(self):
        """Test known values of the two-sided tail."""
        assert chi(0.0) == pytest.approx(1.0)
        assert chi(1.959963984540054) == pytest.approx(0.05, rel=1e-9)
        assert chi(np.array([0.0, 1.0])).shape == (2,)

    def test_chi_matches_normal_tail(self):
        """Test chi(t) = 2 P(Z > t)."""
        for t in (0.3, 1.0, 2.5, 4.0):
            assert chi(t) == pytest.approx(2.0 * stats.norm.sf(t), rel=1e-10)

    @given(st.floats(min_value=0.0, max_value=8.0), st.floats(min_value=0.0, max_value=8.0))
    @settings(max_examples=50, deadline=None)
    def test_chi_decreasing(self, a, b):
        """Test that chi is non-increasing."""
        lo, hi = min(a, b), max(a, b)
        assert chi(lo) >= chi(hi)

    def test_chi_inverse(self):
        """Test that chi_inverse solves chi(t) = p."""
        for p in (1.0, 0.5, 0.05, 1e-6):
            assert chi(chi_inverse(p)) == pytest.approx(p, rel=1e-9)
        with pytest.raises(DomainError):
            chi_inverse(0.0)
        with pytest.raises(DomainError):
            chi_inverse(1.5)

    def test_phi(self):
        """Test the standard normal density."""
        assert phi(0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))
        assert phi(1.0) == pytest.approx(stats.norm.pdf(1.0))

    def test_gamma_exponent(self):
        """Test the decay exponent and its domain."""
        assert gamma_exponent(1.0, 50.0) == pytest.approx(2.0 ** -10 * chi(1.0))
        with pytest.raises(DomainError):
            gamma_exponent(1.0, 0.0)
        with pytest.raises(DomainError):
            gamma_exponent(-1.0, 1.0)


# =============================================================================
# Parameters
# =============================================================================


class TestDisorderParams:
    """Tests for DisorderParams validation."""

    def test_defaults(self):
        """Test default parameters."""
        params = DisorderParams()
        assert params.is_zero_temperature
        assert params.to_dict() == {"h": 0.0, "epsilon": 1.0, "temperature": 0.0}

    def test_invalid(self):
        """Test that negative or non-finite values are rejected."""
        with pytest.raises(DomainError):
            DisorderParams(epsilon=-1.0)
        with pytest.raises(DomainError):
            DisorderParams(temperature=-0.5)
        with pytest.raises(DomainError):
            DisorderParams(h=float("nan"))

    def test_zero_epsilon_allowed(self):
        """Test the pure Ising limit."""
        assert DisorderParams(0.0, 0.0, 1.0).epsilon == 0.0

    def test_scaled_field(self):
        """Test h + epsilon * eta."""
        params = DisorderParams(0.5, 2.0, 0.0)
        assert np.allclose(scaled_field(np.array([0.0, 1.0, -1.0]), params), [0.5, 2.5, -1.5])
