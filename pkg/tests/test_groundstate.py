#!/usr/bin/env python3
"""
test_groundstate.py - Tests for the min-cut ground-state solver

Tests for:
- Agreement with exhaustive enumeration on tiny regions
- Monotonicity in boundary spins and field
- D, B, G and the four annulus energies
- Flip thresholds and their integral identity
- Avalanche scans

Run with:
    pytest tests/test_groundstate.py -v
"""

import numpy as np
import pytest

from rfim_lab.disorder import DisorderParams, FieldSample, keyed_uniform, sample_field
from rfim_lab.errors import DomainError, UnsupportedModelError
from rfim_lab.groundstate import (
    B,
    D,
    G,
    avalanche_scan,
    avalanche_summary,
    disagreement_set,
    enumerate_ground_state,
    flip_thresholds,
    four_energies,
    is_local_minimum,
    minimize,
    plus_minus_ground_states,
    surface_tension_T0,
)
from rfim_lab.lattice import ORIGIN, CouplingSpec, ball, box, vertex_boundary
from rfim_lab.model import BoundaryCondition


def random_boundary(region, coupling, seed):
    """Boundary spins drawn from the keyed generator."""
    sites = sorted(vertex_boundary(region, coupling))
    u = keyed_uniform(seed, np.arange(len(sites)))
    return BoundaryCondition({s: 1 if x < 0.5 else -1 for s, x in zip(sites, u)}, "random")


# =============================================================================
# Oracle agreement
# =============================================================================


@pytest.mark.oracle
class TestEnumerationOracle:
    """Tests that the min cut matches brute force."""

    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("region", [ball(ORIGIN, 2), box(0, 0, 4)], ids=["ball2", "box4"])
    def test_energy_matches(self, region, seed, nn):
        """Test equal minimum energies under random boundaries and fields."""
        params = DisorderParams(0.3 * (seed % 3 - 1), 1.5, 0.0)
        field = sample_field(region, 100 + seed)
        bc = random_boundary(region, nn, seed)
        cut = minimize(region, bc, nn, field, params)
        oracle, second = enumerate_ground_state(region, bc, nn, field, params)
        assert cut.energy == pytest.approx(oracle.energy, abs=1e-9)
        if second - oracle.energy > 1e-7:
            assert np.array_equal(cut.spins, oracle.spins)
            assert cut.unique_within_tol

    @pytest.mark.parametrize("seed", range(4))
    def test_longer_range(self, seed, range2):
        """Test range-2 couplings on ball(0, 2)."""
        region = ball(ORIGIN, 2)
        params = DisorderParams(0.0, 2.0, 0.0)
        field = sample_field(region, 200 + seed)
        bc = random_boundary(region, range2, 50 + seed)
        cut = minimize(region, bc, range2, field, params)
        oracle, _ = enumerate_ground_state(region, bc, range2, field, params)
        assert cut.energy == pytest.approx(oracle.energy, abs=1e-9)

    def test_local_minimum(self, small_ball, nn, ground):
        """Test that no single flip lowers the ground-state energy."""
        field = sample_field(small_ball, 9)
        bc = BoundaryCondition.plus(small_ball, nn)
        result = minimize(small_ball, bc, nn, field, ground)
        assert is_local_minimum(result, bc, nn, field, ground)


# =============================================================================
# Solver behaviour
# =============================================================================


class TestMinimize:
    """Tests for minimize edge cases."""

    def test_negative_coupling_rejected(self, small_ball, ground):
        """Test that antiferromagnetic couplings raise."""
        coupling = CouplingSpec.nearest_neighbor(-1.0)
        field = sample_field(small_ball, 1)
        bc = BoundaryCondition.plus(small_ball, coupling)
        with pytest.raises(UnsupportedModelError):
            minimize(small_ball, bc, coupling, field, ground)

    def test_strong_field_forces_spins(self, small_ball, nn):
        """Test that a large positive h makes every spin plus despite minus boundaries."""
        params = DisorderParams(50.0, 1.0, 0.0)
        field = sample_field(small_ball, 2)
        bc = BoundaryCondition.minus(small_ball, nn)
        result = minimize(small_ball, bc, nn, field, params)
        assert np.all(result.spins == 1)

    def test_zero_field_tie_breaks_to_minus(self, small_ball, nn):
        """Test that exact ties return the smallest plus set."""
        params = DisorderParams(0.0, 0.0, 0.0)
        field = sample_field(small_ball, 3)
        bc = BoundaryCondition(
            {s: (1 if s.x >= 0 else -1) for s in vertex_boundary(small_ball, nn)}, "split"
        )
        result = minimize(small_ball, bc, nn, field, params)
        oracle, _ = enumerate_ground_state(small_ball, bc, nn, field, params)
        assert result.energy == pytest.approx(oracle.energy)

    @pytest.mark.parametrize("seed", range(5))
    def test_boundary_monotonicity(self, seed, nn, ground):
        """Test sigma^+ >= sigma^- pointwise."""
        region = ball(ORIGIN, 4)
        field = sample_field(region, 300 + seed)
        plus, minus = plus_minus_ground_states(region, nn, field, ground)
        assert np.all(plus >= minus)

    def test_field_monotonicity(self, small_ball, nn, ground):
        """Test that raising h never turns a plus spin minus."""
        field = sample_field(small_ball, 4)
        bc = random_boundary(small_ball, nn, 4)
        previous = None
        for h in np.linspace(-3.0, 3.0, 13):
            params = DisorderParams(float(h), 1.0, 0.0)
            spins = minimize(small_ball, bc, nn, field, params, check_degeneracy=False).spins
            if previous is not None:
                assert np.all(spins >= previous)
            previous = spins


# =============================================================================
# T = 0 observables
# =============================================================================


class TestObservables:
    """Tests for D, B, G and the surface tension."""

    @pytest.mark.parametrize("ell", [1, 2])
    @pytest.mark.parametrize("seed", range(6))
    def test_tension_bounded_by_B(self, ell, seed, nn, ground):
        """Test T_l <= 4 B_l samplewise."""
        field = sample_field(ball(ORIGIN, 3 * ell), 400 + seed)
        tension = surface_tension_T0(ell, field, ground, nn)
        assert tension <= 4.0 * B(ell, field, ground, nn) + 1e-9

    def test_tension_nonnegative(self, nn, ground):
        """Test that the surface tension is never negative."""
        for seed in range(6):
            field = sample_field(ball(ORIGIN, 6), 500 + seed)
            assert surface_tension_T0(2, field, ground, nn) >= -1e-9

    def test_four_energies_order(self, nn, ground):
        """Test that surface_tension reads the energies in the documented order."""
        field = sample_field(ball(ORIGIN, 3), 12)
        energies = four_energies(1, field, ground, nn)
        assert energies.surface_tension == pytest.approx(
            -(energies.pp + energies.mm - energies.pm - energies.mp)
        )

    def test_disagreement_set(self, nn, ground):
        """Test that D counts the disagreement set inside Lambda(l)."""
        for seed in range(6):
            field = sample_field(ball(ORIGIN, 6), 600 + seed)
            sites = disagreement_set(2, field, ground, nn)
            assert D(2, field, ground, nn) == len(sites)
            assert all(s in ball(ORIGIN, 2) for s in sites)

    def test_G_antisymmetric(self, nn, ground):
        """Test G(-eta) = -G(eta) at h = 0."""
        field = sample_field(ball(ORIGIN, 6), 13)
        negated = FieldSample(field.region, -field.values, field.seed)
        assert G(2, negated, ground, nn) == pytest.approx(-G(2, field, ground, nn))

    def test_B_requires_range(self, range2, ground):
        """Test that B refuses ell < R(J)."""
        field = sample_field(ball(ORIGIN, 3), 1)
        with pytest.raises(DomainError):
            B(1, field, ground, range2)

    def test_field_too_small(self, nn, ground):
        """Test that scale observables need the field on ball(3l)."""
        field = sample_field(ball(ORIGIN, 4), 1)
        with pytest.raises(DomainError):
            D(2, field, ground, nn)
        with pytest.raises(DomainError):
            D(0, field, ground, nn)


# =============================================================================
# Flip thresholds
# =============================================================================


class TestFlipThresholds:
    """Tests for the per-site flip points."""

    @pytest.mark.parametrize("seed", range(4))
    def test_integral_identity(self, seed, nn):
        """Test T_l = 2 eps sum_v (t-_v - t+_v)."""
        params = DisorderParams(0.0, 1.2, 0.0)
        field = sample_field(ball(ORIGIN, 3), 700 + seed)
        tension = surface_tension_T0(1, field, params, nn)
        thresholds = flip_thresholds(1, field, params, nn)
        assert thresholds.surface_tension(params.epsilon) == pytest.approx(
            tension, rel=1e-5, abs=1e-5
        )

    def test_ordering_and_D(self, nn, ground):
        """Test t+ <= t- and that D at t = 0 counts sites with t+ < 0 < t-."""
        field = sample_field(ball(ORIGIN, 6), 31)
        thresholds = flip_thresholds(2, field, ground, nn)
        assert len(thresholds.sites) == len(ball(ORIGIN, 2))
        assert np.all(thresholds.t_plus <= thresholds.t_minus + 1e-8)
        inside = int(np.sum((thresholds.t_plus < 0) & (thresholds.t_minus > 0)))
        assert D(2, field, ground, nn) == inside
        assert thresholds.integral >= 0.0

    def test_zero_epsilon_rejected(self, nn):
        """Test that thresholds need epsilon > 0."""
        field = sample_field(ball(ORIGIN, 3), 1)
        with pytest.raises(DomainError):
            flip_thresholds(1, field, DisorderParams(0.0, 0.0, 0.0), nn)


# =============================================================================
# Avalanches
# =============================================================================


class TestAvalanches:
    """Tests for ground-state avalanches along an h grid."""

    def test_scan_covers_region(self, nn, ground):
        """Test that every site flips exactly once between very negative and very positive h."""
        region = ball(ORIGIN, 3)
        field = sample_field(region, 41)
        steps = avalanche_scan(region, field, nn, ground, [-20.0, -1.0, 0.0, 1.0, 20.0])
        assert steps[0].cluster_sizes == ()
        assert all(step.reversed_flips == 0 for step in steps)
        assert sum(sum(step.cluster_sizes) for step in steps) == len(region)
        assert sum(1 for step in steps if step.origin_cluster) == 1

    def test_grid_must_increase(self, nn, ground):
        """Test that a non-increasing grid is rejected."""
        region = ball(ORIGIN, 1)
        field = sample_field(region, 1)
        with pytest.raises(DomainError):
            avalanche_scan(region, field, nn, ground, [0.0, 0.0])

    def test_summary(self, nn, ground):
        """Test pooling of several scans."""
        region = ball(ORIGIN, 2)
        scans = [
            avalanche_scan(region, sample_field(region, seed), nn, ground, [-20.0, 0.0, 20.0])
            for seed in range(3)
        ]
        summary = avalanche_summary(scans)
        assert summary.scans == 3
        assert summary.reversed_flips == 0
        assert sum(size * count for size, count in summary.histogram.items()) == 3 * len(region)
        assert 1 <= summary.mean_origin_cluster <= len(region)
        assert summary.largest == max(summary.histogram)
