"""
groundstate.py - Exact zero-temperature solver and T = 0 observables

Ground states come from a source/sink minimum cut (PyMaxflow, Boykov-
Kolmogorov). With sigma_v = 2 x_v - 1 each ferromagnetic pair costs 2 J_uv
when cut, and the effective field b_v becomes a terminal edge: capacity
max(0, 2 b_v) to the sink (spin +1) or max(0, -2 b_v) from the source
(spin -1). Nodes left free by the flow take the source side, so on exact
ties the smallest plus set is returned.

Observables on the ball Lambda(3l) and the annulus Lambda(3l) \\ Lambda(l):
    D          disagreement count in Lambda(l) between + and - ground states
    B          coupling weight of disagreeing edges across the boundary of Lambda(2l)
    T          surface tension -[E++ + E-- - E+- - E-+] over the annulus
    G          -[E+ - E-] over Lambda(3l)
    thresholds per-site flip points of sigma^{+/-} under a uniform shift t on Lambda(l)

Usage:
    from rfim_lab.groundstate import minimize, surface_tension_T0, B
    from rfim_lab.disorder import DisorderParams, sample_field
    from rfim_lab.lattice import CouplingSpec, ball, ORIGIN

    nn = CouplingSpec.nearest_neighbor(1.0)
    params = DisorderParams(h=0.0, epsilon=1.0)
    field = sample_field(ball(ORIGIN, 6), seed=11)
    tension = surface_tension_T0(2, field, params, nn)
    assert tension <= 4 * B(2, field, params, nn) + 1e-9
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import maxflow
import networkx as nx
import numpy as np

from rfim_lab.disorder import DisorderParams, FieldSample, scaled_field
from rfim_lab.enumeration import minimum_energy
from rfim_lab.errors import BracketError, DomainError
from rfim_lab.lattice import (
    ORIGIN,
    CouplingSpec,
    Region,
    Site,
    annulus,
    ball,
    edge_boundary,
    region_graph,
)
from rfim_lab.model import (
    MINUS,
    PLUS,
    BoundaryCondition,
    SpinConfig,
    configuration_energy,
    external_field,
    flip_deltas,
)

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-7
THRESHOLD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    """
    Exact minimizer of the Hamiltonian.

    Attributes:
        config: The ground-state spins.
        energy: H of config, recomputed from the spins.
        unique_within_tol: False when a field perturbation of DEGENERACY_TOL
            changes the minimizer; None when the check was skipped.
    """
    config: SpinConfig
    energy: float
    unique_within_tol: Optional[bool]

    @property
    def spins(self) -> np.ndarray:
        return self.config.spins


class MinCutSolver:
    """
    Min-cut problem for a fixed region and coupling, solved for any field.

    Args:
        region: Region to minimize over.
        coupling: Ferromagnetic couplings.

    Raises:
        UnsupportedModelError: A coupling is negative.
    """

    def __init__(self, region: Region, coupling: CouplingSpec):
        coupling.require_ferromagnetic()
        self.region = region
        self.coupling = coupling
        self.graph = region_graph(region, coupling)
        self._pairs = list(zip(
            self.graph.pair_i.tolist(),
            self.graph.pair_j.tolist(),
            (2.0 * self.graph.pair_weight).tolist(),
        ))

    def boundary_field(self, bc: BoundaryCondition) -> np.ndarray:
        bc.validate(self.region, self.coupling)
        return self.graph.boundary_contribution(bc.assignment)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return the int8 ground-state spins for the effective field b."""
        n = self.graph.size
        if n == 0:
            return np.zeros(0, dtype=np.int8)
        b = np.asarray(b, dtype=float)
        g = maxflow.Graph[float](n, len(self._pairs))
        g.add_nodes(n)
        nodes = np.arange(n)
        for i, j, cap in self._pairs:
            g.add_edge(i, j, cap, cap)
        g.add_grid_tedges(nodes, np.maximum(0.0, -2.0 * b), np.maximum(0.0, 2.0 * b))
        g.maxflow()
        sink_side = g.get_grid_segments(nodes)
        return np.where(sink_side, PLUS, MINUS).astype(np.int8)

    def is_unique(self, b: np.ndarray, spins: np.ndarray, tol: float = DEGENERACY_TOL) -> bool:
        """True when shifting every field by +/- tol leaves the minimizer unchanged."""
        up = self.solve(b + tol)
        down = self.solve(b - tol)
        return bool(np.array_equal(up, spins) and np.array_equal(down, spins))


def minimize(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    check_degeneracy: bool = True,
) -> GroundStateResult:
    """
    Exact global minimizer of H^{region, bc}.

    Args:
        region: Region to minimize over.
        bc: Boundary spins on the vertex boundary of region.
        coupling: Ferromagnetic couplings.
        field: Field covering region.
        params: (h, epsilon); temperature is ignored.
        check_degeneracy: Run the +/- tol perturbation check.

    Returns:
        GroundStateResult: Spins, recomputed energy and degeneracy flag.

    Raises:
        UnsupportedModelError: Negative coupling.
        DomainError: Region/boundary/field mismatch.
    """
    solver = MinCutSolver(region, coupling)
    b = external_field(region, bc, coupling, field, params)
    spins = solver.solve(b)
    energy = configuration_energy(spins, region, coupling, b)
    unique = solver.is_unique(b, spins) if check_degeneracy else None
    if unique is False:
        logger.debug(f"near-degenerate ground state on {region.kind.value} of {len(region)} sites")
    return GroundStateResult(SpinConfig(region, spins), energy, unique)


def enumerate_ground_state(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
) -> Tuple[GroundStateResult, float]:
    """
    Brute-force oracle over all 2^n configurations (n <= 22).

    Returns:
        (minimizer, second-lowest energy)
    """
    b = external_field(region, bc, coupling, field, params)
    energy, spins, second = minimum_energy(region, coupling, b)
    return GroundStateResult(SpinConfig(region, spins), energy, None), second


def is_local_minimum(
    result: GroundStateResult,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    tol: float = 1e-9,
) -> bool:
    """No single-spin flip lowers the energy by more than tol."""
    region = result.config.region
    b = external_field(region, bc, coupling, field, params)
    return bool(np.all(flip_deltas(result.spins, region, coupling, b) >= -tol))


# =============================================================================
# Plus/minus pairs on balls and annuli
# =============================================================================


class _PairProblem:
    """Shared solver for one region under several boundary conditions."""

    def __init__(self, region: Region, coupling: CouplingSpec, field: FieldSample, params: DisorderParams):
        field.require_covers(region, f"{region.kind.value} of {len(region)} sites")
        self.region = region
        self.solver = MinCutSolver(region, coupling)
        self.base = scaled_field(field.on(region), params)
        self._plus = self.solver.graph.boundary_contribution(
            {s: PLUS for s in self.solver.graph.boundary_sites}
        )

    def field_for(self, bc: BoundaryCondition) -> np.ndarray:
        return self.base + self.solver.boundary_field(bc)

    def plus_minus(self, shift: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        base = self.base if shift is None else self.base + shift
        return self.solver.solve(base + self._plus), self.solver.solve(base - self._plus)

    def energy(self, spins: np.ndarray, b: np.ndarray) -> float:
        return configuration_energy(spins, self.region, self.solver.coupling, b)


def plus_minus_ground_states(
    region: Region,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
) -> Tuple[np.ndarray, np.ndarray]:
    """Ground-state spins under uniform plus and uniform minus boundaries."""
    return _PairProblem(region, coupling, field, params).plus_minus()


def origin_disagrees(
    L: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    center: Site = ORIGIN,
) -> bool:
    """sigma^{ball(L),+}_center != sigma^{ball(L),-}_center."""
    region = ball(center, L)
    plus, minus = plus_minus_ground_states(region, coupling, field, params)
    k = region.index[center]
    return bool(plus[k] != minus[k])


def _require_scale(ell: int, field: FieldSample) -> Region:
    if ell < 1:
        raise DomainError(f"ell must be >= 1, got {ell}")
    region = ball(ORIGIN, 3 * ell)
    if not field.covers(region):
        raise DomainError(f"field region too small: it must cover ball(0, {3 * ell})")
    return region


def disagreement_set(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> frozenset:
    """
    Sites of Lambda(l) where the + and - ground states on Lambda(3l) differ.

    Every returned site has sigma^+ = +1 and sigma^- = -1.
    """
    region = _require_scale(ell, field)
    plus, minus = plus_minus_ground_states(region, coupling, field, params)
    inner = ball(ORIGIN, ell)
    idx = region.indices(inner.sites)
    return frozenset(s for s, k in zip(inner.sites, idx) if plus[k] != minus[k])


def D(ell: int, field: FieldSample, params: DisorderParams, coupling: CouplingSpec) -> int:
    """Number of disagreeing sites in Lambda(l)."""
    return len(disagreement_set(ell, field, params, coupling))


def _separating_edges(ell: int, coupling: CouplingSpec) -> List[Tuple[Site, Site, float]]:
    inner = ball(ORIGIN, 2 * ell)
    return [
        (u, v, coupling.strength(v.x - u.x, v.y - u.y))
        for u, v in sorted(edge_boundary(inner, coupling))
    ]


def B(ell: int, field: FieldSample, params: DisorderParams, coupling: CouplingSpec) -> float:
    """
    Weight of edges across the boundary of Lambda(2l) whose endpoints both
    disagree between the + and - annulus ground states.

    Raises:
        DomainError: ell < R(J) (the separating edges would leave the annulus).
    """
    _require_scale(ell, field)
    if ell < coupling.range:
        raise DomainError(f"B requires ell >= R(J) = {coupling.range}, got {ell}")
    region = annulus(ell)
    plus, minus = plus_minus_ground_states(region, coupling, field, params)
    differs = plus != minus
    index = region.index
    return float(sum(
        J for u, v, J in _separating_edges(ell, coupling)
        if differs[index[u]] and differs[index[v]]
    ))


class FourEnergies(NamedTuple):
    """Annulus minima E^{s,s'} with s on the outer and s' on the inner boundary."""
    pp: float
    mm: float
    pm: float
    mp: float

    @property
    def surface_tension(self) -> float:
        return -(self.pp + self.mm - self.pm - self.mp)


def four_energies(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> FourEnergies:
    """Exact annulus ground-state energies under the four mixed boundaries."""
    _require_scale(ell, field)
    problem = _PairProblem(annulus(ell), coupling, field, params)
    energies = []
    for s_outer, s_inner in ((PLUS, PLUS), (MINUS, MINUS), (PLUS, MINUS), (MINUS, PLUS)):
        b = problem.field_for(BoundaryCondition.mixed(ell, s_outer, s_inner, coupling))
        energies.append(problem.energy(problem.solver.solve(b), b))
    return FourEnergies(*energies)


def surface_tension_T0(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> float:
    """-[E++ + E-- - E+- - E-+] over the annulus."""
    return four_energies(ell, field, params, coupling).surface_tension


def G(ell: int, field: FieldSample, params: DisorderParams, coupling: CouplingSpec) -> float:
    """-[E+ - E-] over Lambda(3l)."""
    region = _require_scale(ell, field)
    problem = _PairProblem(region, coupling, field, params)
    plus, minus = problem.plus_minus()
    b_plus = problem.base + problem._plus
    b_minus = problem.base - problem._plus
    return -(problem.energy(plus, b_plus) - problem.energy(minus, b_minus))


# =============================================================================
# Flip thresholds
# =============================================================================


@dataclass(frozen=True, eq=False)
class FlipThresholds:
    """
    Per-site flip points under the shift eta -> eta + t on Lambda(l).

    Attributes:
        sites: Sites of Lambda(l), row-major.
        t_plus: Where sigma^{Lambda(3l),+}_v turns from -1 to +1.
        t_minus: Where sigma^{Lambda(3l),-}_v turns from -1 to +1.
        solves: Number of min-cut pairs solved.
    """
    sites: Tuple[Site, ...]
    t_plus: np.ndarray
    t_minus: np.ndarray
    solves: int

    @property
    def integral(self) -> float:
        """int D(eta^{(t)}) dt = sum_v (t^-_v - t^+_v)."""
        return float(np.sum(self.t_minus - self.t_plus))

    def surface_tension(self, epsilon: float) -> float:
        return 2.0 * epsilon * self.integral


def forcing_shift(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> float:
    """
    A shift t beyond which every spin of Lambda(l) is forced:
    (R + |h| + eps * max|eta|) / eps with R the total coupling per site.
    """
    if params.epsilon <= 0:
        raise DomainError("flip thresholds need epsilon > 0")
    eta = field.on(ball(ORIGIN, ell))
    reach = coupling.forcing_bound + abs(params.h) + params.epsilon * float(np.max(np.abs(eta)))
    return reach / params.epsilon * (1.0 + 1e-9) + 1e-9


def flip_thresholds(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    tol: float = THRESHOLD_TOL,
) -> FlipThresholds:
    """
    Locate every flip of sigma^{+/-}_v, v in Lambda(l), as t increases.

    Both sigma^+ and sigma^- are non-decreasing in t, so each site flips once.
    Intervals are bisected jointly for all sites and split only while some
    site still changes inside them.

    Raises:
        DomainError: epsilon == 0 or field too small.
        BracketError: The forcing bracket does not pin every inner spin.
    """
    region = _require_scale(ell, field)
    inner = ball(ORIGIN, ell)
    idx = region.indices(inner.sites)
    problem = _PairProblem(region, coupling, field, params)
    t_hi = forcing_shift(ell, field, params, coupling)
    t_lo = -t_hi
    unit = np.zeros(len(region))
    unit[idx] = params.epsilon
    solves = 0

    def solve(t: float) -> Tuple[np.ndarray, np.ndarray]:
        nonlocal solves
        solves += 1
        plus, minus = problem.plus_minus(unit * t)
        return plus[idx], minus[idx]

    lo_state, hi_state = solve(t_lo), solve(t_hi)
    if np.any(lo_state[0] != MINUS) or np.any(lo_state[1] != MINUS):
        raise BracketError(f"spins not all -1 at the lower bracket t = {t_lo:.6g}")
    if np.any(hi_state[0] != PLUS) or np.any(hi_state[1] != PLUS):
        raise BracketError(f"spins not all +1 at the upper bracket t = {t_hi:.6g}")

    t_plus = np.full(len(idx), np.nan)
    t_minus = np.full(len(idx), np.nan)
    stack = [(t_lo, t_hi, lo_state, hi_state)]
    while stack:
        a, b, sa, sb = stack.pop()
        changed_plus = sa[0] != sb[0]
        changed_minus = sa[1] != sb[1]
        if not (changed_plus.any() or changed_minus.any()):
            continue
        if b - a <= tol:
            mid = 0.5 * (a + b)
            t_plus[changed_plus] = mid
            t_minus[changed_minus] = mid
            continue
        mid = 0.5 * (a + b)
        sm = solve(mid)
        stack.append((mid, b, sm, sb))
        stack.append((a, mid, sa, sm))

    if np.any(np.isnan(t_plus)) or np.any(np.isnan(t_minus)):
        raise BracketError("a site never flipped inside the forcing bracket")
    if np.any(t_plus > t_minus + tol):
        logger.warning("flip thresholds out of order: t+ > t- at some site")
    return FlipThresholds(inner.sites, t_plus, t_minus, solves)


# =============================================================================
# Avalanches
# =============================================================================


class AvalancheStep(NamedTuple):
    """Clusters of sites that flipped - to + on reaching field h."""
    h: float
    cluster_sizes: Tuple[int, ...]
    reversed_flips: int
    origin_cluster: int = 0


def avalanche_scan(
    region: Region,
    field: FieldSample,
    coupling: CouplingSpec,
    params: DisorderParams,
    h_grid: Sequence[float],
) -> List[AvalancheStep]:
    """
    Ground states under minus boundaries along an increasing h grid.

    The scan starts from the all-minus configuration, so the first step
    reports every site already plus at h_grid[0].

    Returns:
        One AvalancheStep per grid point; clusters are connected components
        of newly flipped sites in the coupling graph, largest first.
    """
    h_grid = [float(h) for h in h_grid]
    if any(b <= a for a, b in zip(h_grid, h_grid[1:])):
        raise DomainError("h_grid must be strictly increasing")
    field.require_covers(region)
    solver = MinCutSolver(region, coupling)
    graph = solver.graph.nx_graph()
    eta_part = params.epsilon * field.on(region)
    minus_links = solver.boundary_field(BoundaryCondition.minus(region, coupling))
    origin = region.index.get(ORIGIN, -1)
    previous = np.full(len(region), MINUS, dtype=np.int8)
    steps: List[AvalancheStep] = []
    for h in h_grid:
        current = solver.solve(h + eta_part + minus_links)
        flipped = np.flatnonzero((previous == MINUS) & (current == PLUS))
        reversed_flips = int(np.count_nonzero((previous == PLUS) & (current == MINUS)))
        if reversed_flips:
            logger.warning(f"{reversed_flips} sites flipped + to - at h = {h:.6g}")
        components = list(nx.connected_components(graph.subgraph(flipped.tolist())))
        sizes = sorted((len(c) for c in components), reverse=True)
        origin_size = next((len(c) for c in components if origin in c), 0)
        steps.append(AvalancheStep(h, tuple(sizes), reversed_flips, origin_size))
        previous = current
    return steps


@dataclass(frozen=True)
class AvalancheSummary:
    """
    Cluster statistics pooled over avalanche scans.

    Attributes:
        histogram: cluster size -> count over every step of every scan.
        mean_origin_cluster: Mean size of the cluster the origin flipped with
            (scans where the origin never flipped are skipped).
        largest: Largest cluster seen.
        reversed_flips: Total + to - flips (0 when ground states are monotone in h).
        scans: Number of scans pooled.
    """
    histogram: Dict[int, int]
    mean_origin_cluster: float
    largest: int
    reversed_flips: int
    scans: int


def avalanche_summary(scans: Sequence[Sequence[AvalancheStep]]) -> AvalancheSummary:
    """Pool the cluster sizes of several avalanche_scan results."""
    histogram: Counter = Counter()
    origin_sizes = []
    reversed_total = 0
    for steps in scans:
        for step in steps:
            histogram.update(step.cluster_sizes)
            reversed_total += step.reversed_flips
        sizes = [s.origin_cluster for s in steps if s.origin_cluster]
        if sizes:
            origin_sizes.append(sizes[0])
    return AvalancheSummary(
        histogram=dict(sorted(histogram.items())),
        mean_origin_cluster=float(np.mean(origin_sizes)) if origin_sizes else 0.0,
        largest=max(histogram, default=0),
        reversed_flips=reversed_total,
        scans=len(scans),
    )
