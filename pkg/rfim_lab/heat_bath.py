"""
heat_bath.py - Monotone coupled heat-bath chains

Two heat-bath chains, one under plus and one under minus boundary spins,
start all-plus and all-minus and consume the same uniforms, keyed by
(chain_seed, sweep, x, y). The update

    s_v <- +1  iff  U < 1 / (1 + exp(-2 h_v / T)),   h_v = sum_u J_uv s_u + b_v

is non-decreasing in the neighbours and in b, so the plus chain stays above
the minus chain at every sweep. Sites are updated colour class by colour
class (networkx greedy colouring of the coupling graph; the checkerboard for
nearest-neighbour couplings).

Estimates are post-burn-in time averages with batch-means standard errors.

Usage:
    from rfim_lab.heat_bath import coupled_heat_bath

    run = coupled_heat_bath(region, coupling, field, params,
                            sweeps=20000, burn_in=None, chain_seed=5)
    plus, minus = run
    plus.estimates - minus.estimates       # per-site magnetization gap
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.special import expit

from rfim_lab.disorder import STREAM_HEAT_BATH, DisorderParams, FieldSample, keyed_uniform, scaled_field
from rfim_lab.errors import DomainError, UnsupportedModelError
from rfim_lab.lattice import CouplingSpec, Region, region_graph
from rfim_lab.model import BoundaryCondition

logger = logging.getLogger(__name__)

PLATEAU_WINDOW = 100


@dataclass(frozen=True)
class HeatBathSettings:
    """
    Run lengths for the MCMC engine.

    Attributes:
        sweeps: Total sweeps including burn-in.
        burn_in: Burn-in sweeps (None: 10 * |region|, capped at half the run).
        chain_seed: Seed of the shared update randomness.
        batches: Number of batches for batch-means errors.
    """
    sweeps: int = 20000
    burn_in: Optional[int] = None
    chain_seed: int = 0
    batches: int = 20

    def to_dict(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "burn_in": self.burn_in,
            "chain_seed": self.chain_seed,
            "batches": self.batches,
        }


@dataclass(frozen=True, eq=False)
class MagnetizationField:
    """
    Per-site magnetization estimates from one chain.

    Attributes:
        region: The region.
        estimates: Time-averaged <s_v>.
        std_error: Batch-means standard error per site.
        sweeps: Total sweeps run.
        burn_in: Effective burn-in (after plateau extension).
    """
    region: Region
    estimates: np.ndarray
    std_error: np.ndarray
    sweeps: int
    burn_in: int


@dataclass(frozen=True, eq=False)
class CoupledRun:
    """
    Output of a coupled plus/minus run. Unpacks as (plus, minus).

    Attributes:
        plus: Plus-boundary chain estimates.
        minus: Minus-boundary chain estimates.
        difference_batches: (batches, n) batch means of s^+ - s^-.
        disagreement_trace: Number of differing sites after every sweep.
        sandwich_violations: Site-sweeps with s^+ < s^- (always 0 for a valid coupling).
        pair_estimates: <s_u s_v> of the plus chain for requested pairs.
        pair_std_error: Batch-means errors of pair_estimates.
    """
    plus: MagnetizationField
    minus: MagnetizationField
    difference_batches: np.ndarray
    disagreement_trace: np.ndarray
    sandwich_violations: int
    pair_estimates: Optional[np.ndarray] = None
    pair_std_error: Optional[np.ndarray] = None

    def __iter__(self) -> Iterator[MagnetizationField]:
        yield self.plus
        yield self.minus


class CoupledHeatBath:
    """
    Plus and minus heat-bath chains sharing every uniform.

    Args:
        region: Region of the chains.
        coupling: Ferromagnetic couplings.
        field: Field covering region.
        params: Model parameters with T > 0.
        chain_seed: Seed of the update randomness.
        plus_bc: Upper boundary condition (default uniform plus).
        minus_bc: Lower boundary condition (default uniform minus).

    Raises:
        UnsupportedModelError: T = 0 or a negative coupling.
    """

    def __init__(
        self,
        region: Region,
        coupling: CouplingSpec,
        field: FieldSample,
        params: DisorderParams,
        chain_seed: int,
        plus_bc: Optional[BoundaryCondition] = None,
        minus_bc: Optional[BoundaryCondition] = None,
    ):
        if params.temperature <= 0:
            raise UnsupportedModelError("heat-bath dynamics need T > 0; use the groundstate module")
        coupling.require_ferromagnetic()
        self.region = region
        self.temperature = params.temperature
        self.chain_seed = int(chain_seed)
        graph = region_graph(region, coupling)
        plus_bc = plus_bc or BoundaryCondition.plus(region, coupling)
        minus_bc = minus_bc or BoundaryCondition.minus(region, coupling)
        plus_bc.validate(region, coupling)
        minus_bc.validate(region, coupling)
        if not minus_bc.dominated_by(plus_bc):
            raise DomainError("minus boundary must lie below the plus boundary pointwise")
        base = scaled_field(field.on(region), params)
        self.b_plus = base + graph.boundary_contribution(plus_bc.assignment)
        self.b_minus = base + graph.boundary_contribution(minus_bc.assignment)

        colouring = nx.greedy_color(graph.nx_graph(), strategy="largest_first")
        n_colours = max(colouring.values(), default=-1) + 1
        adjacency = graph.adjacency()
        self.classes: List[np.ndarray] = []
        self.class_rows = []
        for c in range(n_colours):
            members = np.array(sorted(i for i, col in colouring.items() if col == c), dtype=np.int64)
            self.classes.append(members)
            self.class_rows.append(adjacency[members])
        self.xs = region.coords[:, 0]
        self.ys = region.coords[:, 1]
        self.plus = np.ones(len(region))
        self.minus = -np.ones(len(region))
        self.sweeps_done = 0

    def sweep(self) -> None:
        """One update of every site in both chains."""
        uniforms = keyed_uniform(STREAM_HEAT_BATH, self.chain_seed, self.sweeps_done, self.xs, self.ys)
        two_over_t = 2.0 / self.temperature
        for members, rows in zip(self.classes, self.class_rows):
            u = uniforms[members]
            for state, b in ((self.plus, self.b_plus), (self.minus, self.b_minus)):
                local = rows @ state + b[members]
                state[members] = np.where(u < expit(two_over_t * local), 1.0, -1.0)
        self.sweeps_done += 1

    def disagreement(self) -> int:
        return int(np.count_nonzero(self.plus != self.minus))

    def violations(self) -> int:
        return int(np.count_nonzero(self.plus < self.minus))


def _plateaued(trace: List[int], window: int = PLATEAU_WINDOW) -> bool:
    if len(trace) < 2 * window:
        return False
    last = float(np.mean(trace[-window:]))
    previous = float(np.mean(trace[-2 * window:-window]))
    return last >= previous - max(0.5, 0.05 * previous)


def _batch_error(batch_means: np.ndarray) -> np.ndarray:
    if batch_means.shape[0] < 2:
        return np.zeros(batch_means.shape[1:])
    return np.std(batch_means, axis=0, ddof=1) / math.sqrt(batch_means.shape[0])


def coupled_heat_bath(
    region: Region,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    sweeps: int,
    burn_in: Optional[int],
    chain_seed: int,
    batches: int = 20,
    adaptive: bool = True,
    plus_bc: Optional[BoundaryCondition] = None,
    minus_bc: Optional[BoundaryCondition] = None,
    pairs: Optional[Sequence[Tuple[int, int]]] = None,
) -> CoupledRun:
    """
    Run coupled plus/minus heat-bath chains and average after burn-in.

    Args:
        region: Region of the chains.
        coupling: Ferromagnetic couplings.
        field: Field covering region.
        params: Model parameters with T > 0.
        sweeps: Total sweeps, > burn_in.
        burn_in: Burn-in sweeps; None for 10 * |region| (capped at half the run).
        chain_seed: Seed of the shared update randomness.
        batches: Batches for batch-means errors.
        adaptive: Extend burn-in in 100-sweep steps until the disagreement
            count stops decreasing (at most half the measurement budget).
        plus_bc: Upper boundary (default uniform plus).
        minus_bc: Lower boundary (default uniform minus).
        pairs: Region index pairs whose plus-chain products <s_u s_v> are averaged.

    Returns:
        CoupledRun: Unpacks as (plus, minus) MagnetizationFields.

    Raises:
        UnsupportedModelError: T = 0.
        DomainError: sweeps <= burn_in.
    """
    chains = CoupledHeatBath(region, coupling, field, params, chain_seed, plus_bc, minus_bc)
    if burn_in is None:
        burn_in = min(10 * len(region), sweeps // 2)
    if sweeps <= burn_in:
        raise DomainError(f"sweeps ({sweeps}) must exceed burn_in ({burn_in})")

    trace: List[int] = []
    violations = 0
    effective = burn_in
    extension_cap = burn_in + (sweeps - burn_in) // 2
    while chains.sweeps_done < effective:
        chains.sweep()
        trace.append(chains.disagreement())
        violations += chains.violations()
        if adaptive and chains.sweeps_done == effective and effective < extension_cap:
            if not _plateaued(trace) and trace[-1] > 0:
                effective = min(effective + PLATEAU_WINDOW, extension_cap)
    if effective > burn_in:
        logger.info(f"burn-in extended from {burn_in} to {effective} sweeps")

    measured = sweeps - effective
    n_batches = max(1, min(batches, measured))
    edges = np.linspace(0, measured, n_batches + 1).astype(np.int64)
    n = len(region)
    plus_sums = np.zeros((n_batches, n))
    minus_sums = np.zeros((n_batches, n))
    pair_idx = np.array(pairs, dtype=np.int64).reshape(-1, 2) if pairs else None
    pair_sums = np.zeros((n_batches, len(pair_idx))) if pair_idx is not None else None
    for k in range(n_batches):
        for _ in range(edges[k + 1] - edges[k]):
            chains.sweep()
            trace.append(chains.disagreement())
            violations += chains.violations()
            plus_sums[k] += chains.plus
            minus_sums[k] += chains.minus
            if pair_idx is not None:
                pair_sums[k] += chains.plus[pair_idx[:, 0]] * chains.plus[pair_idx[:, 1]]
    counts = np.diff(edges).astype(float)[:, None]
    plus_batches = plus_sums / counts
    minus_batches = minus_sums / counts
    weights = counts[:, 0] / counts.sum()
    if violations:
        logger.error(f"heat-bath sandwich violated on {violations} site-sweeps")

    def field_of(batch_means: np.ndarray) -> MagnetizationField:
        return MagnetizationField(
            region=region,
            estimates=np.clip(weights @ batch_means, -1.0, 1.0),
            std_error=_batch_error(batch_means),
            sweeps=sweeps,
            burn_in=effective,
        )

    pair_estimates = pair_error = None
    if pair_idx is not None:
        pair_batches = pair_sums / counts
        pair_estimates = weights @ pair_batches
        pair_error = _batch_error(pair_batches)
    return CoupledRun(
        plus=field_of(plus_batches),
        minus=field_of(minus_batches),
        difference_batches=plus_batches - minus_batches,
        disagreement_trace=np.array(trace, dtype=np.int64),
        sandwich_violations=violations,
        pair_estimates=pair_estimates,
        pair_std_error=pair_error,
    )
