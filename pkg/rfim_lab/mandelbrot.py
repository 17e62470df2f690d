"""
mandelbrot.py - Fractal (Mandelbrot) percolation on 3-adic squares

Start from one square of side 3^levels. At each level every surviving block
is cut into 3 x 3 children and each child is removed independently with
probability p. The surviving set after the last level is a boolean grid.

Every retention decision reads the uniform keyed by
(seed, sample, level, block x, block y) and keeps the block iff U >= p, so
samples at different p share their randomness and the surviving set shrinks
monotonically as p grows.

Usage:
    from rfim_lab.mandelbrot import mandelbrot_percolation, mandelbrot_scan

    stats = mandelbrot_percolation(p=0.2, levels=5, samples=200, seed=7)
    stats.crossing.mean, stats.area.mean, stats.expected_area

    series = mandelbrot_scan([0.0, 0.1, 0.2, 0.3], levels=4, samples=200, seed=7)
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from rfim_lab.disorder import STREAM_MANDELBROT, keyed_uniform
from rfim_lab.errors import DomainError
from rfim_lab.estimators import BoundCheck, Estimate, _mean_and_error, _probability, check_upper
from rfim_lab.replicas import run_replicas

logger = logging.getLogger(__name__)

MAX_LEVELS = 7


def surviving_set(p: float, levels: int, seed: int, sample: int) -> np.ndarray:
    """
    Boolean (3^levels, 3^levels) grid of surviving sites for one sample.

    Raises:
        DomainError: p outside [0, 1] or levels outside [0, MAX_LEVELS].
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if not 0 <= levels <= MAX_LEVELS:
        raise DomainError(f"levels must lie in [0, {MAX_LEVELS}], got {levels}")
    alive = np.ones((1, 1), dtype=bool)
    for level in range(1, levels + 1):
        alive = np.repeat(np.repeat(alive, 3, axis=0), 3, axis=1)
        side = 3 ** level
        by, bx = np.mgrid[0:side, 0:side]
        u = keyed_uniform(STREAM_MANDELBROT, seed, sample, level, bx, by)
        alive &= u >= p
        if not alive.any():
            side_final = 3 ** levels
            return np.zeros((side_final, side_final), dtype=bool)
    return alive


def crosses(alive: np.ndarray) -> bool:
    """Left-right crossing of the surviving set (4-connected)."""
    labels, _ = ndimage.label(alive)
    left = set(np.unique(labels[:, 0])) - {0}
    right = set(np.unique(labels[:, -1])) - {0}
    return bool(left & right)


def connected_at(alive: np.ndarray, distances: Sequence[int]) -> np.ndarray:
    """
    For each r, whether the center site and the site r columns to its right
    are both alive and in the same 4-connected cluster.
    """
    labels, _ = ndimage.label(alive)
    mid = alive.shape[0] // 2
    out = np.zeros(len(distances), dtype=bool)
    here = labels[mid, mid]
    if here == 0:
        return out
    for i, r in enumerate(distances):
        col = mid + r
        if col < alive.shape[1]:
            out[i] = labels[mid, col] == here
    return out


@dataclass(frozen=True, eq=False)
class MandelbrotStats:
    """
    Crossing and connectivity statistics at one removal probability.

    Attributes:
        p: Removal probability.
        levels: Number of subdivision levels.
        crossing: Left-right crossing probability.
        area: Surviving area fraction.
        expected_area: (1 - p)^levels.
        distances: Distances of the connectivity curve.
        connectivity: Connection probability per distance.
        seed: Base seed.
    """
    p: float
    levels: int
    crossing: Estimate
    area: Estimate
    expected_area: float
    distances: Tuple[int, ...]
    connectivity: Tuple[Estimate, ...]
    seed: int

    def area_check(self) -> BoundCheck:
        """|area - (1-p)^n| within 3 sigma, as a BoundCheck."""
        return check_upper(
            "|area - (1-p)^n|", abs(self.area.mean - self.expected_area), 0.0, self.area.std_error,
        )

    def to_rows(self) -> List[dict]:
        base = {"replicas": self.crossing.replicas, "seed": self.seed}
        rows = [
            {"scale": self.levels, "statistic": f"crossing(p={self.p:g})",
             "mean": self.crossing.mean, "std_err": self.crossing.std_error, **base},
            {"scale": self.levels, "statistic": f"area(p={self.p:g})",
             "mean": self.area.mean, "std_err": self.area.std_error, **base},
        ]
        rows.extend(
            {"scale": r, "statistic": f"connectivity(p={self.p:g})",
             "mean": e.mean, "std_err": e.std_error, **base}
            for r, e in zip(self.distances, self.connectivity)
        )
        return rows


def _default_distances(levels: int) -> Tuple[int, ...]:
    half = 3 ** levels // 2
    return tuple(r for r in (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024) if r <= half)


def _sample_task(sample: int, p: float, levels: int, seed: int, distances: Tuple[int, ...]) -> np.ndarray:
    alive = surviving_set(p, levels, seed, sample)
    return np.concatenate(([float(crosses(alive)), float(alive.mean())], connected_at(alive, distances)))


def mandelbrot_percolation(
    p: float,
    levels: int,
    samples: int,
    seed: int,
    distances: Sequence[int] = (),
    threads: int = 1,
) -> MandelbrotStats:
    """
    Simulate fractal percolation and report crossing, area and connectivity.

    Args:
        p: Removal probability in [0, 1].
        levels: Subdivision levels, at most 7.
        samples: Independent samples.
        seed: Base seed; sample i uses (seed, i).
        distances: Connectivity distances (default: powers of 2 up to half the side).
        threads: Worker processes.

    Returns:
        MandelbrotStats: Estimates with binomial (Wilson) intervals.

    Raises:
        DomainError: p outside [0, 1] or levels outside [0, 7].
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if not 0 <= levels <= MAX_LEVELS:
        raise DomainError(f"levels must lie in [0, {MAX_LEVELS}], got {levels}")
    distances = tuple(int(r) for r in distances) or _default_distances(levels)
    task = partial(_sample_task, p=p, levels=levels, seed=seed, distances=distances)
    batch = run_replicas(task, samples, threads)
    values = np.array(batch.values, dtype=float).reshape(-1, 2 + len(distances))
    failed = tuple(i for i, _ in batch.failed)
    area = Estimate(*_mean_and_error(values[:, 1]), len(values), None, failed)
    return MandelbrotStats(
        p=p,
        levels=levels,
        crossing=_probability(values[:, 0], failed),
        area=area,
        expected_area=(1.0 - p) ** levels,
        distances=distances,
        connectivity=tuple(_probability(values[:, 2 + i], failed) for i in range(len(distances))),
        seed=seed,
    )


def mandelbrot_scan(
    p_grid: Sequence[float],
    levels: int,
    samples: int,
    seed: int,
    threads: int = 1,
) -> Tuple[List[MandelbrotStats], int]:
    """
    Run mandelbrot_percolation over a grid of p with common random numbers.

    Returns:
        (stats per p, number of increases of the crossing probability along
        the increasing p grid; 0 under the monotone coupling)
    """
    grid = [float(p) for p in p_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("p grid must be strictly increasing")
    results = [mandelbrot_percolation(p, levels, samples, seed, threads=threads) for p in grid]
    crossing = np.array([r.crossing.mean for r in results])
    increases = int(np.sum(np.diff(crossing) > 0))
    if increases:
        logger.error(f"crossing probability increased {increases} times along the p grid")
    return results, increases
