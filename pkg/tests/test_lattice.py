#!/usr/bin/env python3
"""
test_lattice.py - Tests for sites, couplings and regions

Tests for:
- Coupling validation, range and forcing bound
- Ball, sphere, annulus and box geometry
- Edge and vertex boundaries
- Solver index arrays

Run with:
    pytest tests/test_lattice.py -v
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfim_lab.errors import DomainError, UnsupportedModelError
from rfim_lab.lattice import (
    ORIGIN,
    CouplingSpec,
    RegionKind,
    Site,
    annulus,
    annulus_boundary_parts,
    ball,
    box,
    custom_region,
    edge_boundary,
    edge_boundary_weight,
    region_graph,
    sphere,
    vertex_boundary,
)


# =============================================================================
# Couplings
# =============================================================================


class TestCouplingSpec:
    """Tests for CouplingSpec."""

    def test_nearest_neighbor(self):
        """Test the four-offset coupling."""
        coupling = CouplingSpec.nearest_neighbor(2.0)
        assert coupling.range == 1
        assert coupling.is_nearest_neighbor
        assert coupling.is_ferromagnetic
        assert coupling.nn_strength == 2.0
        assert coupling.forcing_bound == 8.0

    def test_isotropic_range_two(self):
        """Test that range 2 couples every displacement with |dx| + |dy| <= 2."""
        coupling = CouplingSpec.isotropic(0.5, 2)
        assert len(coupling.offsets) == 12
        assert coupling.range == 2
        assert not coupling.is_nearest_neighbor
        assert coupling.forcing_bound == pytest.approx(6.0)
        assert coupling.strength(1, 1) == 0.5
        assert coupling.strength(3, 0) == 0.0

    def test_asymmetric_rejected(self):
        """Test that J(dx,dy) != J(-dx,-dy) is rejected."""
        with pytest.raises(DomainError):
            CouplingSpec.from_mapping({(1, 0): 1.0, (-1, 0): 2.0})

    def test_zero_offset_rejected(self):
        """Test that a self-coupling is rejected."""
        with pytest.raises(DomainError):
            CouplingSpec(((0, 0, 1.0),))

    def test_negative_coupling_flagged(self):
        """Test that antiferromagnetic couplings are representable but flagged."""
        coupling = CouplingSpec.nearest_neighbor(-1.0)
        assert not coupling.is_ferromagnetic
        with pytest.raises(UnsupportedModelError):
            coupling.require_ferromagnetic()

    def test_nn_strength_requires_nn(self):
        """Test that nn_strength refuses longer-range couplings."""
        with pytest.raises(UnsupportedModelError):
            CouplingSpec.isotropic(1.0, 2).nn_strength

    def test_empty_coupling(self):
        """Test the free (J = 0) coupling."""
        coupling = CouplingSpec.nearest_neighbor(0.0)
        assert coupling.offsets == ()
        assert coupling.range == 0
        assert coupling.nn_strength == 0.0


# =============================================================================
# Regions
# =============================================================================


class TestRegions:
    """Tests for ball, sphere, annulus and box."""

    @given(st.integers(min_value=0, max_value=12))
    @settings(max_examples=13, deadline=None)
    def test_ball_size(self, L):
        """Test |ball(L)| = 1 + 2L(L+1)."""
        assert len(ball(ORIGIN, L)) == 1 + 2 * L * (L + 1)

    @given(st.integers(min_value=1, max_value=20))
    @settings(max_examples=20, deadline=None)
    def test_sphere_size(self, r):
        """Test |sphere(r)| = 4r."""
        assert len(sphere(ORIGIN, r)) == 4 * r

    @given(st.integers(min_value=1, max_value=6))
    @settings(max_examples=6, deadline=None)
    def test_annulus_size(self, ell):
        """Test |annulus(l)| = |ball(3l)| - |ball(l)|."""
        outer = 3 * ell
        assert len(annulus(ell)) == 2 * outer * (outer + 1) - 2 * ell * (ell + 1)

    def test_row_major_order(self):
        """Test that sites are sorted by y, then x."""
        region = custom_region([Site(1, 0), Site(0, 0), Site(0, -1)])
        assert region.sites == (Site(0, -1), Site(0, 0), Site(1, 0))
        assert region.index[Site(0, 0)] == 1

    def test_duplicate_site_rejected(self):
        """Test that duplicate sites raise."""
        with pytest.raises(DomainError):
            custom_region([Site(0, 0), Site(0, 0)])

    def test_box_metadata(self):
        """Test box kind and side."""
        square = box(2, 3, 4)
        assert square.kind == RegionKind.BOX
        assert square.radius == 4
        assert square.bounding_box == (2, 3, 4, 4)
        assert box(0, 0, 3, 2).radius is None

    def test_grid_mask_of_ball(self):
        """Test that ball(1) is a plus shape in its bounding box."""
        mask = ball(ORIGIN, 1).grid_mask()
        expected = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        assert np.array_equal(mask, expected)

    def test_indices_missing_site(self):
        """Test that indices() rejects outside sites."""
        with pytest.raises(DomainError):
            ball(ORIGIN, 1).indices([Site(5, 5)])

    def test_invalid_sizes(self):
        """Test negative radii and empty boxes."""
        with pytest.raises(DomainError):
            ball(ORIGIN, -1)
        with pytest.raises(DomainError):
            annulus(0)
        with pytest.raises(DomainError):
            box(0, 0, 0)


# =============================================================================
# Boundaries
# =============================================================================


class TestBoundaries:
    """Tests for edge and vertex boundaries."""

    @given(st.integers(min_value=0, max_value=8))
    @settings(max_examples=9, deadline=None)
    def test_ball_vertex_boundary_is_next_sphere(self, L):
        """Test that the NN vertex boundary of ball(L) is sphere(L+1)."""
        coupling = CouplingSpec.nearest_neighbor(1.0)
        assert vertex_boundary(ball(ORIGIN, L), coupling) == sphere(ORIGIN, L + 1)

    @given(st.integers(min_value=1, max_value=10))
    @settings(max_examples=10, deadline=None)
    def test_box_boundary_weight(self, side):
        """Test that a square of side s has NN boundary weight 4 s J."""
        coupling = CouplingSpec.nearest_neighbor(1.5)
        assert edge_boundary_weight(box(0, 0, side), coupling) == pytest.approx(6.0 * side)

    def test_edge_boundary_pairs_point_outward(self):
        """Test that every edge-boundary pair has u inside and v outside."""
        region = ball(ORIGIN, 2)
        coupling = CouplingSpec.isotropic(1.0, 2)
        for u, v in edge_boundary(region, coupling):
            assert u in region
            assert v not in region
            assert 1 <= u.distance(v) <= 2

    def test_annulus_boundary_parts(self):
        """Test the inner/outer split of the annulus boundary."""
        coupling = CouplingSpec.nearest_neighbor(1.0)
        outer, inner = annulus_boundary_parts(2, coupling)
        assert inner == sphere(ORIGIN, 2)
        assert outer == sphere(ORIGIN, 7)


# =============================================================================
# Solver view
# =============================================================================


class TestRegionGraph:
    """Tests for region_graph index arrays."""

    def test_box_pairs_and_links(self):
        """Test pair and link counts of a 3x3 box."""
        graph = region_graph(box(0, 0, 3), CouplingSpec.nearest_neighbor(1.0))
        assert graph.pair_i.size == 12
        assert np.all(graph.pair_i < graph.pair_j)
        assert graph.link_site.size == 12
        assert len(graph.boundary_sites) == 12

    def test_bandwidth(self):
        """Test that the row-major frontier of a 4-wide box is 4."""
        graph = region_graph(box(0, 0, 4), CouplingSpec.nearest_neighbor(1.0))
        assert graph.bandwidth == 4

    def test_boundary_contribution(self):
        """Test per-site boundary sums under all-plus boundary spins."""
        region = box(0, 0, 3)
        graph = region_graph(region, CouplingSpec.nearest_neighbor(1.0))
        plus = {s: 1 for s in graph.boundary_sites}
        contribution = graph.boundary_contribution(plus)
        assert contribution[region.index[Site(1, 1)]] == 0.0
        assert contribution[region.index[Site(0, 0)]] == 2.0
        assert contribution[region.index[Site(1, 0)]] == 1.0

    def test_nx_graph_is_connected(self):
        """Test that a ball is connected under NN couplings."""
        import networkx as nx

        graph = region_graph(ball(ORIGIN, 3), CouplingSpec.nearest_neighbor(1.0))
        assert nx.is_connected(graph.nx_graph())
