"""
hierarchical.py - Block events, curdling and the high-disorder regime

Large-field events:
    A block D carries a large field when |h |D| + eps eta(D)| > sum of J over
    its edge boundary. For a side-3^n square and nearest-neighbor couplings
    the boundary weight is 4 * 3^n * J, and at h = 0 the event has probability
    chi(4J / eps) at every level.

Curdling (square windows of side 3^N, blocks aligned to the window corner):
    n(x)  first level whose block around x carries a large field (capped at N)
    k(x)  smallest k < n(x) with x cut off from the window edge by a
          *-connected circuit of sites with n <= k, else n(x)
    tau   sign of the level-n(x) block field where k(x) = n(x); inside each
          enclosing circuit, the exact ground state given the spins already
          placed; whatever is left, the ground state under the window
          boundary spin.

High disorder:
    Sites with |h + eps eta| <= 4J are "exceptional" (not forced). When their
    density is below the site-percolation threshold of Z^2, disagreement can
    only travel along finite exceptional clusters.

Usage:
    from rfim_lab.hierarchical import curdle, high_disorder_check
    from rfim_lab.lattice import box

    window = box(0, 0, 27)
    state = curdle(window, field, params, max_level=3, coupling=nn)
    print(state.to_grid_text())
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, stats

from rfim_lab.disorder import DisorderParams, FieldSample, chi, replica_seed, sample_field
from rfim_lab.errors import DomainError, UnsupportedModelError
from rfim_lab.estimators import (
    SIGMAS,
    BoundCheck,
    Estimate,
    EstimateSeries,
    Verdict,
    _mean_and_error,
    _probability,
    check_upper,
    origin_gap,
)
from rfim_lab.groundstate import minimize
from rfim_lab.lattice import (
    ORIGIN,
    CouplingSpec,
    Region,
    RegionKind,
    Site,
    ball,
    box,
    custom_region,
    edge_boundary_weight,
    vertex_boundary,
)
from rfim_lab.model import MINUS, PLUS, BoundaryCondition, SpinConfig
from rfim_lab.replicas import run_replicas

logger = logging.getLogger(__name__)

# Site percolation threshold of the square lattice (numerical literature value).
P_C_SQUARE = 0.592746
P_C_PROVENANCE = "square-lattice site percolation threshold, numerical literature value"

CAP_WARNING_FRACTION = 0.01
RESIDUAL_WARNING = 1e-3


# =============================================================================
# Block partitions and large-field events
# =============================================================================


@dataclass(frozen=True)
class BlockPartition:
    """
    Level-n partition of Z^2 into squares of side 3^n.

    Blocks are [a 3^n, (a+1) 3^n) x [b 3^n, (b+1) 3^n) shifted by origin.
    """
    level: int
    origin: Site = ORIGIN

    def __post_init__(self):
        if self.level < 0:
            raise DomainError(f"level must be >= 0, got {self.level}")

    @property
    def side(self) -> int:
        return 3 ** self.level

    def block_of(self, site: Site) -> Tuple[int, int]:
        return (site[0] - self.origin.x) // self.side, (site[1] - self.origin.y) // self.side

    def block(self, a: int, b: int) -> Region:
        s = self.side
        return box(self.origin.x + a * s, self.origin.y + b * s, s)

    def parent(self, a: int, b: int) -> Tuple[int, int]:
        """Index of the enclosing level-(n+1) block."""
        return a // 3, b // 3

    def children(self, a: int, b: int) -> Iterator[Tuple[int, int]]:
        """The nine level-(n-1) blocks inside block (a, b)."""
        if self.level == 0:
            return iter(())
        return ((3 * a + i, 3 * b + j) for j in range(3) for i in range(3))


def large_field_event(
    block: Region,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> bool:
    """
    |h |D| + eps * eta(D)| > sum_{edge boundary of D} J.

    Raises:
        DomainError: The field does not cover the block.
    """
    field.require_covers(block, "block")
    total = params.h * len(block) + params.epsilon * float(np.sum(field.on(block)))
    return abs(total) > edge_boundary_weight(block, coupling)


def large_field_probability(params: DisorderParams, coupling: CouplingSpec, level: int = 0) -> float:
    """Closed-form P(large field) at h = 0: chi(W / (eps 3^n)) with W the boundary weight."""
    if params.epsilon <= 0:
        return 0.0
    side = 3 ** level
    weight = edge_boundary_weight(box(0, 0, side), coupling)
    return float(chi(weight / (params.epsilon * side)))


def _large_field_task(
    index: int,
    level: int,
    params: DisorderParams,
    coupling: CouplingSpec,
    seed: int,
) -> float:
    block = box(0, 0, 3 ** level)
    field = sample_field(block, replica_seed(seed, index))
    return float(large_field_event(block, field, params, coupling))


def large_field_frequency(
    level: int,
    params: DisorderParams,
    coupling: CouplingSpec,
    samples: int,
    seed: int,
    threads: int = 1,
) -> Tuple[Estimate, BoundCheck]:
    """
    Empirical frequency of the large-field event on independent level-n blocks.

    Returns:
        (frequency with Wilson interval, two-sided 3-sigma check against the closed form)
    """
    task = partial(_large_field_task, level=level, params=params, coupling=coupling, seed=seed)
    batch = run_replicas(task, samples, threads)
    estimate = _probability(np.array(batch.values), [i for i, _ in batch.failed])
    predicted = large_field_probability(params, coupling, level)
    sigma = math.sqrt(max(predicted * (1.0 - predicted), 1e-300) / max(estimate.replicas, 1))
    z = abs(estimate.mean - predicted) / sigma if sigma > 0 else 0.0
    check = BoundCheck(
        name=f"P(large field, level {level}) = chi(4J/eps)",
        verdict=Verdict.PASS if z <= SIGMAS else Verdict.FAIL,
        observed=estimate.mean,
        bound=predicted,
        std_error=sigma,
        note=f"|z| = {z:.3g}",
    )
    return estimate, check


# =============================================================================
# Curdling
# =============================================================================

DIRECT = 0
ENCLOSED = 1
RESIDUAL = 2


@dataclass(frozen=True, eq=False)
class CurdlingState:
    """
    Hierarchical spin assignment on a square window.

    Grids are indexed [row, col] with row = y - y0 and col = x - x0.

    Attributes:
        window: The window box.
        max_level: N, with window side 3^N.
        n_level: First large-field level per site (max_level where capped).
        k_level: Loop-separation level per site.
        capped: Sites with no large-field block up to max_level.
        tau: Constructed spins.
        source: DIRECT, ENCLOSED or RESIDUAL per site.
        boundary_spin: Spin outside the window used for residual sites.
        warning: Set when more than 1% of sites are capped.
    """
    window: Region
    max_level: int
    n_level: np.ndarray
    k_level: np.ndarray
    capped: np.ndarray
    tau: np.ndarray
    source: np.ndarray
    boundary_spin: int
    warning: Optional[str] = None

    @property
    def capped_fraction(self) -> float:
        return float(self.capped.mean())

    def spins(self) -> SpinConfig:
        rows, cols = self.window.grid_positions()
        return SpinConfig(self.window, self.tau[rows, cols])

    def to_grid_text(self) -> str:
        """n(x) digits ('*' where capped), a blank line, then the tau grid; top row = largest y."""
        digits = np.where(self.capped, "*", self.n_level.astype(str))
        signs = np.where(self.tau > 0, "+", "-")
        top = "\n".join("".join(row) for row in digits[::-1])
        bottom = "\n".join("".join(row) for row in signs[::-1])
        return f"{top}\n\n{bottom}"


def _window_side(window: Region, max_level: int) -> int:
    side = 3 ** max_level
    x0, y0, width, height = window.bounding_box
    if window.kind is not RegionKind.BOX or width != side or height != side or len(window) != side * side:
        raise DomainError(f"curdling window must be a square box of side 3^{max_level} = {side}")
    return side


def _block_totals(grid: np.ndarray, level: int, params: DisorderParams) -> np.ndarray:
    """h |D| + eps eta(D) per level-n block, expanded back to the site grid."""
    s = 3 ** level
    m = grid.shape[0] // s
    sums = grid.reshape(m, s, m, s).sum(axis=(1, 3))
    totals = params.h * s * s + params.epsilon * sums
    return np.repeat(np.repeat(totals, s, axis=0), s, axis=1)


def _enclosed(open_sites: np.ndarray) -> np.ndarray:
    """Labels of 4-connected components of open_sites that avoid the grid edge (0 elsewhere)."""
    labels, _ = ndimage.label(open_sites)
    edge = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    labels[np.isin(labels, edge)] = 0
    return labels


def _solve_patch(
    sites: List[Site],
    assigned: Dict[Site, int],
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    outside_spin: int,
    window_sites: frozenset,
) -> SpinConfig:
    """Ground state on a patch given the spins already placed around it."""
    region = custom_region(sites)
    boundary = {}
    for s in vertex_boundary(region, coupling):
        if s in assigned:
            boundary[s] = assigned[s]
        elif s not in window_sites:
            boundary[s] = outside_spin
        else:
            raise DomainError(f"boundary site {s} of a curdling patch is unassigned")
    bc = BoundaryCondition(boundary, "curdling")
    return minimize(region, bc, coupling, field, params, check_degeneracy=False).config


def curdle(
    window: Region,
    field: FieldSample,
    params: DisorderParams,
    max_level: int,
    coupling: CouplingSpec,
    boundary_spin: int = PLUS,
) -> CurdlingState:
    """
    Build n(x), k(x) and tau on a square window of side 3^max_level.

    Raises:
        DomainError: Window is not a side-3^max_level square, or the field does not cover it.
        UnsupportedModelError: Non-nearest-neighbor couplings.
    """
    if not coupling.is_nearest_neighbor or not coupling.is_ferromagnetic:
        raise UnsupportedModelError("curdling is defined for ferromagnetic nearest-neighbor couplings")
    if max_level < 0:
        raise DomainError(f"max_level must be >= 0, got {max_level}")
    side = _window_side(window, max_level)
    field.require_covers(window, "curdling window")
    J = coupling.nn_strength
    x0, y0, _, _ = window.bounding_box
    rows, cols = window.grid_positions()
    eta = np.zeros((side, side))
    eta[rows, cols] = field.on(window)

    sentinel = max_level + 1
    n_level = np.full((side, side), sentinel, dtype=np.int64)
    block_sign = np.zeros((side, side), dtype=np.int8)
    for level in range(max_level + 1):
        totals = _block_totals(eta, level, params)
        event = np.abs(totals) > 4.0 * (3 ** level) * J
        fresh = event & (n_level == sentinel)
        n_level[fresh] = level
        block_sign[fresh] = np.where(totals[fresh] >= 0, PLUS, MINUS)
    capped = n_level == sentinel
    n_level[capped] = max_level

    k_level = n_level.copy()
    k_set = np.zeros((side, side), dtype=bool)
    level_labels = []
    for k in range(max_level):
        labels = _enclosed(n_level > k)
        newly = (labels > 0) & ~k_set
        k_level[newly] = k
        k_set |= newly
        level_labels.append(labels)

    tau = np.zeros((side, side), dtype=np.int8)
    source = np.full((side, side), -1, dtype=np.int8)
    direct = (k_level == n_level) & ~capped
    tau[direct] = block_sign[direct]
    source[direct] = DIRECT

    def sites_where(mask: np.ndarray) -> List[Site]:
        rr, cc = np.nonzero(mask)
        return [Site(int(c) + x0, int(r) + y0) for r, c in zip(rr, cc)]

    def place(mask: np.ndarray, tag: int) -> None:
        placed = sites_where(source >= 0)
        assigned = {s: int(tau[s.y - y0, s.x - x0]) for s in placed}
        config = _solve_patch(sites_where(mask), assigned, field, params, coupling, boundary_spin, window.site_set)
        for s, v in zip(config.region.sites, config.spins):
            tau[s.y - y0, s.x - x0] = v
            source[s.y - y0, s.x - x0] = tag

    # components are processed by increasing k, so every circuit around one is already placed
    for k, labels in enumerate(level_labels):
        targets = np.unique(labels[(k_level == k) & k_set & (source < 0)])
        for label in targets[targets > 0]:
            place(labels == label, ENCLOSED)

    if np.any(source < 0):
        place(source < 0, RESIDUAL)

    warning = None
    fraction = float(capped.mean())
    residual = (1.0 - large_field_probability(params, coupling)) ** max_level
    if fraction > CAP_WARNING_FRACTION:
        warning = f"{fraction:.1%} of sites found no large-field block up to level {max_level}"
    elif residual >= RESIDUAL_WARNING:
        warning = f"max_level {max_level} leaves residual probability {residual:.3g} of no large field"
    if warning:
        logger.warning(warning)
    return CurdlingState(
        window=window,
        max_level=max_level,
        n_level=n_level,
        k_level=k_level,
        capped=capped,
        tau=tau,
        source=source,
        boundary_spin=boundary_spin,
        warning=warning,
    )


@dataclass(frozen=True)
class CurdlingAccuracy:
    """
    Agreement of tau with the exact window ground state.

    Attributes:
        agreement: Fraction of sites where tau equals the ground state.
        forced_sites: Sites with |h + eps eta| > 4J.
        forced_mismatches: Forced sites where tau != sign(h + eps eta).
    """
    agreement: float
    forced_sites: int
    forced_mismatches: int


def curdling_accuracy(
    state: CurdlingState,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> CurdlingAccuracy:
    """Compare tau with minimize() on the same window and boundary spin."""
    window = state.window
    bc = BoundaryCondition.uniform(window, coupling, state.boundary_spin)
    ground = minimize(window, bc, coupling, field, params, check_degeneracy=False).spins
    tau = state.spins().spins
    local = params.h + params.epsilon * field.on(window)
    forced = np.abs(local) > coupling.forcing_bound
    mismatches = int(np.sum(tau[forced] != np.sign(local[forced])))
    return CurdlingAccuracy(
        agreement=float(np.mean(tau == ground)),
        forced_sites=int(forced.sum()),
        forced_mismatches=mismatches,
    )


# =============================================================================
# High-disorder regime and exceptional-site percolation
# =============================================================================


@dataclass(frozen=True)
class HighDisorderReport:
    """
    Exceptional-site density against the percolation threshold.

    Attributes:
        exceptional_prob: P(|h + eps eta_0| <= 4J).
        threshold: Site-percolation threshold used.
        exponential_regime: exceptional_prob < threshold.
        verdict: Human-readable regime label.
        provenance: Source of the threshold constant.
    """
    exceptional_prob: float
    threshold: float
    exponential_regime: bool
    verdict: str
    provenance: str = P_C_PROVENANCE


def exceptional_probability(params: DisorderParams, coupling: CouplingSpec) -> float:
    """Phi((4J - h)/eps) - Phi((-4J - h)/eps)."""
    bound = coupling.forcing_bound
    if params.epsilon == 0:
        return 1.0 if abs(params.h) <= bound else 0.0
    upper = stats.norm.cdf((bound - params.h) / params.epsilon)
    lower = stats.norm.cdf((-bound - params.h) / params.epsilon)
    return float(upper - lower)


def high_disorder_check(params: DisorderParams, coupling: CouplingSpec) -> HighDisorderReport:
    """
    Closed-form exceptional density and the exponential-decay regime verdict.

    Raises:
        UnsupportedModelError: Non-nearest-neighbor couplings.
    """
    if not coupling.is_nearest_neighbor:
        raise UnsupportedModelError("the percolation criterion is stated for nearest-neighbor couplings")
    prob = exceptional_probability(params, coupling)
    regime = prob < P_C_SQUARE
    verdict = "exponential-decay regime" if regime else "criterion not met"
    return HighDisorderReport(prob, P_C_SQUARE, regime, verdict)


@dataclass(frozen=True, eq=False)
class PercolationSeries:
    """
    Connectivity of the origin through exceptional sites.

    Attributes:
        distances: 0..L_max.
        connectivity: P(origin joined to the distance-L sphere) per distance.
        open_probability: Empirical exceptional density.
        predicted_open: Closed-form density.
        slope, slope_se: Fit of log connectivity against L (None when not fitted).
        decay_significant: slope + 3 se < 0.
        forcing_mismatches: Closed sites whose ground-state spin differs from sign(h + eps eta).
        failed: Failed replica indices.
    """
    distances: Tuple[int, ...]
    connectivity: Tuple[Estimate, ...]
    open_probability: Estimate
    predicted_open: float
    slope: Optional[float]
    slope_se: Optional[float]
    decay_significant: bool
    forcing_mismatches: int
    failed: Tuple[int, ...] = ()

    def to_rows(self, seed: int) -> List[dict]:
        rows = [
            {"scale": L, "statistic": "connectivity", "mean": e.mean, "std_err": e.std_error,
             "replicas": e.replicas, "seed": seed}
            for L, e in zip(self.distances, self.connectivity)
        ]
        rows.append({"scale": 0, "statistic": "open_probability", "mean": self.open_probability.mean,
                     "std_err": self.open_probability.std_error,
                     "replicas": self.open_probability.replicas, "seed": seed})
        return rows


def _origin_reach(open_grid: np.ndarray, dist_grid: np.ndarray, origin_rc: Tuple[int, int]) -> int:
    """Largest distance reached by the open cluster of the origin (-1 if the origin is closed)."""
    if not open_grid[origin_rc]:
        return -1
    labels, _ = ndimage.label(open_grid)
    return int(dist_grid[labels == labels[origin_rc]].max())


def _percolation_task(
    index: int,
    window: Region,
    params: DisorderParams,
    coupling: CouplingSpec,
    seed: int,
    check_forcing: bool,
) -> Tuple[int, float, int]:
    field = sample_field(window, replica_seed(seed, index))
    local = params.h + params.epsilon * field.on(window)
    is_open = np.abs(local) <= coupling.forcing_bound
    rows, cols = window.grid_positions()
    grid = np.zeros(window.grid_mask().shape, dtype=bool)
    grid[rows, cols] = is_open
    dist = np.full(grid.shape, -1, dtype=np.int64)
    dist[rows, cols] = np.abs(window.coords[:, 0]) + np.abs(window.coords[:, 1])
    k = window.index[ORIGIN]
    reach = _origin_reach(grid, dist, (int(rows[k]), int(cols[k])))
    mismatches = 0
    if check_forcing:
        bc = BoundaryCondition.plus(window, coupling)
        spins = minimize(window, bc, coupling, field, params, check_degeneracy=False).spins
        closed = ~is_open
        mismatches = int(np.sum(spins[closed] != np.sign(local[closed])))
    return reach, float(is_open.mean()), mismatches


def exceptional_percolation(
    window: Region,
    params: DisorderParams,
    replicas: int,
    seed: int,
    coupling: CouplingSpec,
    threads: int = 1,
    check_forcing: bool = False,
) -> PercolationSeries:
    """
    Connectivity decay of exceptional sites |h + eps eta| <= 4J from the origin.

    Raises:
        DomainError: The window does not contain the origin.
        UnsupportedModelError: Non-nearest-neighbor couplings.
    """
    report = high_disorder_check(params, coupling)
    if ORIGIN not in window:
        raise DomainError("percolation window must contain the origin")
    task = partial(
        _percolation_task, window=window, params=params, coupling=coupling,
        seed=seed, check_forcing=check_forcing,
    )
    batch = run_replicas(task, replicas, threads)
    values = np.array(batch.values, dtype=float).reshape(-1, 3)
    failed = tuple(i for i, _ in batch.failed)
    reach, density, mismatches = values.T
    L_max = int(np.max(np.abs(window.coords).sum(axis=1)))
    distances = tuple(range(L_max + 1))
    connectivity = tuple(_probability((reach >= L).astype(float), failed) for L in distances)
    open_prob = Estimate(*_mean_and_error(density), len(density), None, failed)

    slope = slope_se = None
    significant = False
    positive = [(L, c.mean) for L, c in zip(distances, connectivity) if c.mean > 0]
    if report.exponential_regime and len(positive) >= 3:
        x = np.array([p[0] for p in positive], dtype=float)
        y = np.log([p[1] for p in positive])
        fit = stats.linregress(x, y)
        slope, slope_se = float(fit.slope), float(fit.stderr)
        significant = bool(slope + 3.0 * slope_se < 0)
    total_mismatches = int(mismatches.sum())
    if total_mismatches:
        logger.error(f"{total_mismatches} closed sites disagree with their forced spin")
    return PercolationSeries(
        distances=distances,
        connectivity=connectivity,
        open_probability=open_prob,
        predicted_open=report.exceptional_prob,
        slope=slope,
        slope_se=slope_se,
        decay_significant=significant,
        forcing_mismatches=total_mismatches,
        failed=failed,
    )


# =============================================================================
# Block coarse-graining density
# =============================================================================


@dataclass(frozen=True)
class BlockDensityReport:
    """
    Probability that a block holds a site sensitive at distance l.

    Attributes:
        ell: Sensitivity distance.
        block_side: Side of the block (2 l by default).
        block_probability: P(some v in the block has sigma^{Lambda_v(l),+}_v != sigma^{Lambda_v(l),-}_v).
        m_hat: m(l) estimated from all block sites of all replicas.
        union_bound: |block| m(l).
        boundary_bound: |dv Lambda(l)| m(l).
        scaled_probability: block_probability * l, the quantity a c0 / l^(d-1) form keeps bounded.
        checks: Union-bound check.
    """
    ell: int
    block_side: int
    block_probability: Estimate
    m_hat: Estimate
    union_bound: float
    boundary_bound: float
    scaled_probability: float
    checks: Tuple[BoundCheck, ...]


def _block_task(
    index: int,
    ell: int,
    side: int,
    params: DisorderParams,
    coupling: CouplingSpec,
    seed: int,
) -> Tuple[float, float]:
    block = box(0, 0, side)
    field = sample_field(box(-ell, -ell, side + 2 * ell), replica_seed(seed, index))
    gaps = [origin_gap(ell, field, params, coupling, center=v) for v in block.sites]
    return float(max(gaps) > 0), float(np.mean(gaps))


def block_density(
    ell: int,
    params: DisorderParams,
    coupling: CouplingSpec,
    replicas: int,
    seed: int,
    block_side: Optional[int] = None,
    threads: int = 1,
) -> BlockDensityReport:
    """
    Estimate the sensitive-block probability at T = 0 with its union bounds.

    Raises:
        UnsupportedModelError: T > 0.
        DomainError: ell < 1.
    """
    if not params.is_zero_temperature:
        raise UnsupportedModelError("block_density is defined at T = 0")
    if ell < 1:
        raise DomainError(f"ell must be >= 1, got {ell}")
    side = block_side or 2 * ell
    task = partial(_block_task, ell=ell, side=side, params=params, coupling=coupling, seed=seed)
    batch = run_replicas(task, replicas, threads)
    values = np.array(batch.values, dtype=float).reshape(-1, 2)
    failed = tuple(i for i, _ in batch.failed)
    block_prob = _probability(values[:, 0], failed)
    m_hat = Estimate(*_mean_and_error(values[:, 1]), len(values), None, failed)
    union = side * side * m_hat.mean
    boundary = len(vertex_boundary(ball(ORIGIN, ell), coupling)) * m_hat.mean
    check = check_upper(
        "P(block sensitive) <= |block| m(l)", block_prob.mean, union,
        math.hypot(block_prob.std_error, side * side * m_hat.std_error),
    )
    return BlockDensityReport(
        ell=ell,
        block_side=side,
        block_probability=block_prob,
        m_hat=m_hat,
        union_bound=union,
        boundary_bound=boundary,
        scaled_probability=block_prob.mean * ell,
        checks=(check,),
    )


def block_density_scan(
    ell: int,
    epsilons: Sequence[float],
    params: DisorderParams,
    coupling: CouplingSpec,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> Tuple[EstimateSeries, int]:
    """
    Sensitive-block probability across an epsilon grid with common fields.

    Returns:
        (series indexed by position in the grid, number of increases along
        the increasing-epsilon grid)
    """
    eps = [float(e) for e in epsilons]
    if any(b <= a for a, b in zip(eps, eps[1:])):
        raise DomainError("epsilon grid must be strictly increasing")
    reports = [
        block_density(ell, DisorderParams(params.h, e, params.temperature), coupling, replicas, seed, threads=threads)
        for e in eps
    ]
    means = np.array([r.block_probability.mean for r in reports])
    errors = np.array([r.block_probability.std_error for r in reports])
    increases = int(np.sum(np.diff(means) > 1e-12))
    series = EstimateSeries(
        statistic=f"block_probability(ell={ell})",
        scales=tuple(range(len(eps))),
        mean=means,
        std_error=errors,
        replicas=tuple(r.block_probability.replicas for r in reports),
        params=params,
        coupling=coupling,
        base_seed=seed,
    )
    return series, increases
