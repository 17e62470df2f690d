#!/usr/bin/env python3
"""
test_mandelbrot.py - Tests for fractal percolation

Tests for:
- Surviving sets at the extreme removal probabilities
- Monotone coupling across p
- Crossing and connectivity detection
- Area estimates against (1 - p)^levels

Run with:
    pytest tests/test_mandelbrot.py -v
"""

import numpy as np
import pytest

from rfim_lab.errors import DomainError
from rfim_lab.mandelbrot import (
    connected_at,
    crosses,
    mandelbrot_percolation,
    mandelbrot_scan,
    surviving_set,
)


# =============================================================================
# Surviving sets
# =============================================================================


class TestSurvivingSet:
    """Tests for surviving_set."""

    def test_nothing_removed(self):
        """Test that p = 0 keeps every site."""
        alive = surviving_set(0.0, 3, seed=1, sample=0)
        assert alive.shape == (27, 27)
        assert alive.all()

    def test_everything_removed(self):
        """Test that p = 1 removes every site once levels >= 1."""
        assert not surviving_set(1.0, 2, seed=1, sample=0).any()
        assert surviving_set(1.0, 0, seed=1, sample=0).all()

    def test_monotone_in_p(self):
        """Test that raising p only removes sites."""
        for sample in range(5):
            low = surviving_set(0.1, 4, seed=3, sample=sample)
            high = surviving_set(0.3, 4, seed=3, sample=sample)
            assert not np.any(high & ~low)

    def test_block_structure(self):
        """Test that removals come in whole 3 x 3 blocks at the last level."""
        alive = surviving_set(0.4, 2, seed=5, sample=1)
        blocks = alive.reshape(3, 3, 3, 3).swapaxes(1, 2)
        first_level = blocks.reshape(3, 3, 9).any(axis=2)
        assert np.all(alive <= np.repeat(np.repeat(first_level, 3, axis=0), 3, axis=1))

    def test_invalid(self):
        """Test p and level ranges."""
        with pytest.raises(DomainError):
            surviving_set(-0.1, 2, 0, 0)
        with pytest.raises(DomainError):
            surviving_set(0.5, 8, 0, 0)


class TestConnectivity:
    """Tests for crosses and connected_at."""

    def test_full_grid(self):
        """Test that a full grid crosses and connects at every distance."""
        alive = np.ones((9, 9), dtype=bool)
        assert crosses(alive)
        assert connected_at(alive, [1, 2, 4]).all()

    def test_blocked_column(self):
        """Test that a dead column blocks the crossing."""
        alive = np.ones((9, 9), dtype=bool)
        alive[:, 6] = False
        assert not crosses(alive)
        assert list(connected_at(alive, [1, 2, 3])) == [True, False, False]

    def test_dead_center(self):
        """Test that a dead center connects nowhere."""
        alive = np.ones((9, 9), dtype=bool)
        alive[4, 4] = False
        assert not connected_at(alive, [1, 2]).any()


# =============================================================================
# Statistics
# =============================================================================


class TestStatistics:
    """Tests for mandelbrot_percolation and mandelbrot_scan."""

    def test_area_matches_expectation(self):
        """Test the mean area against (1 - p)^levels."""
        stats = mandelbrot_percolation(0.2, 3, samples=400, seed=7)
        assert stats.expected_area == pytest.approx(0.8 ** 3)
        assert abs(stats.area.mean - stats.expected_area) <= 5 * stats.area.std_error + 1e-12

    def test_rows(self):
        """Test row export with default distances."""
        stats = mandelbrot_percolation(0.1, 3, samples=20, seed=1)
        assert stats.distances == (1, 2, 4, 8)
        rows = stats.to_rows()
        assert len(rows) == 2 + len(stats.distances)
        assert rows[0]["statistic"] == "crossing(p=0.1)"

    def test_extremes(self):
        """Test crossing probability 1 at p = 0 and 0 at p = 1."""
        assert mandelbrot_percolation(0.0, 2, samples=5, seed=0).crossing.mean == 1.0
        assert mandelbrot_percolation(1.0, 2, samples=5, seed=0).crossing.mean == 0.0

    def test_scan_monotone(self):
        """Test that crossing never increases along the p grid."""
        results, increases = mandelbrot_scan([0.0, 0.1, 0.2, 0.3, 0.5], 3, samples=50, seed=2)
        assert increases == 0
        assert [r.p for r in results] == [0.0, 0.1, 0.2, 0.3, 0.5]

    def test_scan_grid_must_increase(self):
        """Test that a non-increasing p grid raises."""
        with pytest.raises(DomainError):
            mandelbrot_scan([0.2, 0.1], 2, samples=5, seed=0)
