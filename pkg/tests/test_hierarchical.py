#!/usr/bin/env python3
"""
test_hierarchical.py - Tests for block events, curdling and high disorder

Tests for:
- 3-adic block partitions
- Large-field events and their closed-form probability
- Curdling construction and its agreement with forced spins
- Exceptional-site density, percolation and block density

Run with:
    pytest tests/test_hierarchical.py -v
"""

import numpy as np
import pytest

from rfim_lab.disorder import DisorderParams, chi, constant_field, sample_field
from rfim_lab.errors import DomainError, UnsupportedModelError
from rfim_lab.hierarchical import (
    DIRECT,
    RESIDUAL,
    BlockPartition,
    block_density,
    block_density_scan,
    curdle,
    curdling_accuracy,
    exceptional_percolation,
    exceptional_probability,
    high_disorder_check,
    large_field_event,
    large_field_frequency,
    large_field_probability,
)
from rfim_lab.estimators import Verdict
from rfim_lab.lattice import ORIGIN, Site, ball, box
from rfim_lab.model import PLUS


# =============================================================================
# Blocks
# =============================================================================


class TestBlockPartition:
    """Tests for BlockPartition."""

    def test_geometry(self):
        """Test side, block lookup and block regions."""
        partition = BlockPartition(2)
        assert partition.side == 9
        assert partition.block_of(Site(10, -1)) == (1, -1)
        block = partition.block(1, -1)
        assert Site(10, -1) in block
        assert len(block) == 81

    def test_parent_and_children(self):
        """Test the 3 x 3 nesting of levels."""
        partition = BlockPartition(1)
        children = list(partition.children(1, 1))
        assert len(children) == 9
        assert children[0] == (3, 3)
        assert partition.parent(4, 5) == (1, 1)
        assert list(BlockPartition(0).children(0, 0)) == []

    def test_negative_level(self):
        """Test that levels below 0 are rejected."""
        with pytest.raises(DomainError):
            BlockPartition(-1)


class TestLargeField:
    """Tests for large-field events."""

    def test_event_threshold(self, nn, ground):
        """Test |eta| > 4J on a single site."""
        block = box(0, 0, 1)
        assert large_field_event(block, constant_field(block, 5.0), ground, nn)
        assert not large_field_event(block, constant_field(block, 3.0), ground, nn)
        assert large_field_event(block, constant_field(block, -5.0), ground, nn)

    def test_probability_scale_free(self, nn):
        """Test that P(large field) = chi(4J/eps) at every level for NN couplings."""
        params = DisorderParams(0.0, 2.0, 0.0)
        for level in range(4):
            assert large_field_probability(params, nn, level) == pytest.approx(chi(2.0))
        assert large_field_probability(DisorderParams(0.0, 0.0, 0.0), nn) == 0.0

    def test_frequency(self, nn):
        """Test the empirical level-1 frequency against the closed form."""
        params = DisorderParams(0.0, 2.0, 0.0)
        estimate, check = large_field_frequency(1, params, nn, samples=2000, seed=4)
        assert estimate.replicas == 2000
        assert check.bound == pytest.approx(chi(2.0))
        assert abs(estimate.mean - check.bound) <= 5 * check.std_error


# =============================================================================
# Curdling
# =============================================================================


class TestCurdling:
    """Tests for curdle and curdling_accuracy."""

    def test_every_site_assigned(self, nn):
        """Test that tau is a full spin assignment with consistent levels."""
        window = box(0, 0, 9)
        params = DisorderParams(0.0, 2.0, 0.0)
        field = sample_field(window, 12)
        state = curdle(window, field, params, max_level=2, coupling=nn)
        assert np.all(np.abs(state.tau) == 1)
        assert np.all(state.source >= 0)
        assert np.all(state.k_level <= state.n_level)
        assert np.all((state.n_level >= 0) & (state.n_level <= 2))
        assert len(state.spins()) == 81

    def test_forced_sites_direct(self, nn):
        """Test that level-0 large fields are placed directly with their sign."""
        window = box(0, 0, 9)
        params = DisorderParams(0.0, 3.0, 0.0)
        field = sample_field(window, 13)
        state = curdle(window, field, params, max_level=2, coupling=nn)
        rows, cols = window.grid_positions()
        local = params.epsilon * field.on(window)
        forced = np.abs(local) > 4.0
        assert np.all(state.n_level[rows[forced], cols[forced]] == 0)
        assert np.all(state.source[rows[forced], cols[forced]] == DIRECT)
        assert np.all(state.tau[rows[forced], cols[forced]] == np.sign(local[forced]))
        accuracy = curdling_accuracy(state, field, params, nn)
        assert accuracy.forced_mismatches == 0
        assert accuracy.forced_sites == int(forced.sum())
        assert 0.0 <= accuracy.agreement <= 1.0

    def test_no_disorder_is_residual(self, nn):
        """Test that without large fields every site is capped and solved as residual."""
        window = box(0, 0, 3)
        params = DisorderParams(0.0, 0.0, 0.0)
        state = curdle(window, sample_field(window, 1), params, max_level=1, coupling=nn)
        assert state.capped.all()
        assert state.warning is not None
        assert np.all(state.source == RESIDUAL)
        assert np.all(state.tau == PLUS)

    def test_grid_text(self, nn):
        """Test the level grid, a blank line and the spin grid."""
        window = box(0, 0, 3)
        params = DisorderParams(0.0, 2.0, 0.0)
        state = curdle(window, sample_field(window, 2), params, max_level=1, coupling=nn)
        lines = state.to_grid_text().split("\n")
        assert len(lines) == 7
        assert lines[3] == ""
        assert all(len(line) == 3 for line in lines[:3] + lines[4:])
        assert set("".join(lines[4:])) <= {"+", "-"}

    def test_invalid_window(self, nn, ground):
        """Test non-square windows and longer-range couplings."""
        from rfim_lab.lattice import CouplingSpec

        window = box(0, 0, 10)
        field = sample_field(window, 1)
        with pytest.raises(DomainError):
            curdle(window, field, ground, max_level=2, coupling=nn)
        with pytest.raises(UnsupportedModelError):
            curdle(box(0, 0, 9), field, ground, max_level=2, coupling=CouplingSpec.isotropic(1.0, 2))


# =============================================================================
# High disorder
# =============================================================================


class TestHighDisorder:
    """Tests for the exceptional-site criterion."""

    def test_exceptional_probability(self, nn):
        """Test closed forms including the epsilon = 0 limit."""
        assert exceptional_probability(DisorderParams(0.0, 0.0, 0.0), nn) == 1.0
        assert exceptional_probability(DisorderParams(5.0, 0.0, 0.0), nn) == 0.0
        p = exceptional_probability(DisorderParams(0.0, 8.0, 0.0), nn)
        assert p == pytest.approx(1.0 - chi(0.5))

    def test_regimes(self, nn):
        """Test the threshold verdict at weak and strong disorder."""
        assert high_disorder_check(DisorderParams(0.0, 8.0, 0.0), nn).exponential_regime
        weak = high_disorder_check(DisorderParams(0.0, 1.0, 0.0), nn)
        assert not weak.exponential_regime
        assert weak.verdict == "criterion not met"

    def test_non_nearest_neighbor(self, range2):
        """Test that the criterion refuses longer-range couplings."""
        with pytest.raises(UnsupportedModelError):
            high_disorder_check(DisorderParams(0.0, 8.0, 0.0), range2)

    def test_percolation(self, nn):
        """Test connectivity decreases with distance and closed sites are forced."""
        params = DisorderParams(0.0, 8.0, 0.0)
        series = exceptional_percolation(ball(ORIGIN, 6), params, 50, seed=3, coupling=nn, check_forcing=True)
        means = [c.mean for c in series.connectivity]
        assert series.distances == tuple(range(7))
        assert np.all(np.diff(means) <= 0)
        assert series.forcing_mismatches == 0
        assert series.predicted_open == pytest.approx(1.0 - chi(0.5))

    def test_percolation_needs_origin(self, nn):
        """Test that the window must contain the origin."""
        with pytest.raises(DomainError):
            exceptional_percolation(box(5, 5, 3), DisorderParams(0.0, 8.0, 0.0), 5, seed=0, coupling=nn)


class TestBlockDensity:
    """Tests for block_density and block_density_scan."""

    def test_union_bound(self, nn, ground):
        """Test that the sensitive-block probability respects the union bound."""
        report = block_density(1, ground, nn, replicas=20, seed=1)
        assert report.block_side == 2
        assert report.block_probability.mean <= report.union_bound + 1e-12
        assert report.checks[0].verdict == Verdict.PASS

    def test_zero_temperature_only(self, nn, hot):
        """Test that T > 0 is rejected."""
        with pytest.raises(UnsupportedModelError):
            block_density(1, hot, nn, replicas=5, seed=0)

    def test_scan(self, nn, ground):
        """Test a scan over an increasing epsilon grid."""
        series, increases = block_density_scan(1, [1.0, 4.0], ground, nn, replicas=10, seed=2)
        assert series.scales == (0, 1)
        assert 0 <= increases <= 1
