"""
enumeration.py - Exhaustive configuration sweeps for tiny regions

Energies of all 2^n spin configurations, generated in fixed-size blocks so
memory stays bounded. Configuration k has spin +1 at site i iff bit i of k
is set. Both the ground-state oracle and the exact Gibbs engine sit on top
of this module, and the block split never changes the result.
"""

from typing import Iterator, Tuple

import numpy as np

from rfim_lab.errors import BudgetError
from rfim_lab.lattice import CouplingSpec, Region, region_graph

ENUMERATION_BUDGET = 22
BLOCK_BITS = 16


def check_budget(n: int, budget: int = ENUMERATION_BUDGET) -> None:
    if n > budget:
        raise BudgetError(
            f"exact enumeration over {n} sites exceeds the budget of {budget} sites"
        )


def configuration_blocks(n: int, block_bits: int = BLOCK_BITS) -> Iterator[np.ndarray]:
    """
    Yield (m, n) float arrays of +1/-1 spins covering all 2^n configurations
    in increasing configuration order.
    """
    total = 1 << n
    step = 1 << min(block_bits, n)
    shifts = np.arange(n, dtype=np.int64)
    for start in range(0, total, step):
        k = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = (k[:, None] >> shifts[None, :]) & 1
        yield 2.0 * bits - 1.0


def block_energies(
    spins: np.ndarray,
    region: Region,
    coupling: CouplingSpec,
    b: np.ndarray,
) -> np.ndarray:
    """Energies of a block of configurations given the effective field b."""
    graph = region_graph(region, coupling)
    energy = -(spins @ b)
    if graph.pair_i.size:
        energy -= (spins[:, graph.pair_i] * spins[:, graph.pair_j]) @ graph.pair_weight
    return energy


def minimum_energy(
    region: Region,
    coupling: CouplingSpec,
    b: np.ndarray,
) -> Tuple[float, np.ndarray, float]:
    """
    Brute-force minimum over all configurations.

    Returns:
        (minimum energy, a minimizing spin vector, second-lowest energy
        among the remaining configurations; inf for a single configuration)
    """
    n = len(region)
    check_budget(n)
    if n == 0:
        return 0.0, np.zeros(0, dtype=np.int8), float("inf")
    best, second = np.inf, np.inf
    best_spins = None
    for block in configuration_blocks(n):
        energy = block_energies(block, region, coupling, b)
        order = np.argsort(energy, kind="stable")[:2]
        for pos in order:
            e = float(energy[pos])
            if e < best:
                second = best
                best = e
                best_spins = block[pos].astype(np.int8)
            elif e < second:
                second = e
    return best, best_spins, second
