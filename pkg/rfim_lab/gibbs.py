"""
gibbs.py - Positive-temperature Gibbs states and observables

Exact engines:
    exact_gibbs     full enumeration of 2^n configurations (n <= 22)
    transfer_gibbs  row-major transfer sweep over the last W sites, where W is
                    the largest index gap between coupled sites (W <= 16)
    solve_gibbs     picks whichever exact engine fits

Both work in the log domain (scipy.special.logsumexp / numpy.logaddexp) and
return log Z with per-site magnetizations. Larger systems go through the
coupled heat-bath chains in heat_bath.py.

Positive-temperature observables on Lambda(3l) and its annulus:
    D_posT       1/2 sum_{v in Lambda(l)} [<s_v>^+ - <s_v>^-]
    B_tilde      (J/2) sum_{v in boundary of Lambda(2l)} [<s_v>^{ann,+} - <s_v>^{ann,-}]
    tension      T log(Z++ Z-- / (Z+- Z-+)) over the annulus, exactly or as
                 2 eps * int D_posT(eta^{(t)}) dt
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from rfim_lab.disorder import DisorderParams, FieldSample, keyed_bits, shift_field
from rfim_lab.enumeration import ENUMERATION_BUDGET, block_energies, check_budget, configuration_blocks
from rfim_lab.errors import BudgetError, DomainError, UnsupportedModelError
from rfim_lab.heat_bath import HeatBathSettings, coupled_heat_bath
from rfim_lab.lattice import ORIGIN, CouplingSpec, Region, Site, annulus, ball, region_graph, vertex_boundary
from rfim_lab.model import MINUS, PLUS, BoundaryCondition, clamp, external_field

logger = logging.getLogger(__name__)

TRANSFER_WIDTH_BUDGET = 16
TRANSFER_MEMORY_BUDGET = 1 << 25  # stored backward messages (float64 entries)


class Engine(Enum):
    """Positive-temperature engine."""
    EXACT = "exact"
    MCMC = "mcmc"


@dataclass(frozen=True, eq=False)
class ExactGibbsResult:
    """
    Exact partition function and magnetizations.

    Attributes:
        region: The region.
        log_partition: log Z^{region, tau}.
        magnetization: <s_v> per site, in [-1, 1] (None when not requested).
    """
    region: Region
    log_partition: float
    magnetization: Optional[np.ndarray]

    def magnetization_at(self, site: Site) -> float:
        return float(self.magnetization[self.region.index[site]])


def _require_positive_temperature(params: DisorderParams) -> None:
    if params.temperature <= 0:
        raise UnsupportedModelError(
            "T = 0 has no Gibbs enumeration; use the groundstate module instead"
        )


def exact_gibbs(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
) -> ExactGibbsResult:
    """
    Exact Z and <s_v> by summing all 2^n configurations.

    Raises:
        BudgetError: More than 22 sites.
        UnsupportedModelError: T = 0.
    """
    _require_positive_temperature(params)
    check_budget(len(region), ENUMERATION_BUDGET)
    b = external_field(region, bc, coupling, field, params)
    return _enumerate(region, coupling, b, params.temperature)


def _enumerate(region: Region, coupling: CouplingSpec, b: np.ndarray, temperature: float) -> ExactGibbsResult:
    n = len(region)
    if n == 0:
        return ExactGibbsResult(region, 0.0, np.zeros(0))
    block_lse = []
    block_mag = []
    for spins in configuration_blocks(n):
        logw = -block_energies(spins, region, coupling, b) / temperature
        lse = logsumexp(logw)
        block_lse.append(lse)
        block_mag.append(np.exp(logw - lse) @ spins)
    block_lse = np.array(block_lse)
    log_z = float(logsumexp(block_lse))
    weights = np.exp(block_lse - log_z)
    magnetization = np.clip(weights @ np.array(block_mag), -1.0, 1.0)
    return ExactGibbsResult(region, log_z, magnetization)


def transfer_gibbs(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    magnetizations: bool = True,
) -> ExactGibbsResult:
    """
    Exact Z (and <s_v>) by a row-major transfer sweep.

    The state after site k holds the spins of sites k-W+1..k, where W is the
    region's coupling bandwidth in row-major order. Magnetizations combine
    forward and backward log-messages.

    Raises:
        BudgetError: W > 16, or stored messages exceed the memory budget.
        UnsupportedModelError: T = 0.
    """
    _require_positive_temperature(params)
    b = external_field(region, bc, coupling, field, params)
    return _transfer(region, coupling, b, params.temperature, magnetizations)


def _transfer(
    region: Region,
    coupling: CouplingSpec,
    b: np.ndarray,
    temperature: float,
    magnetizations: bool,
) -> ExactGibbsResult:
    n = len(region)
    if n == 0:
        return ExactGibbsResult(region, 0.0, np.zeros(0))
    graph = region_graph(region, coupling)
    width = max(graph.bandwidth, 1)
    if width > TRANSFER_WIDTH_BUDGET:
        raise BudgetError(
            f"transfer width {width} exceeds the budget of {TRANSFER_WIDTH_BUDGET}"
        )
    if magnetizations and n * (1 << width) > TRANSFER_MEMORY_BUDGET:
        raise BudgetError(f"transfer messages for {n} sites at width {width} exceed memory budget")

    states = 1 << width
    half = states >> 1
    bits = (np.arange(states)[:, None] >> np.arange(width)[None, :]) & 1
    state_spins = 2.0 * bits - 1.0  # column p = site k-1-p before adding site k

    # local coupling field from earlier sites, per site k and prior state
    earlier = [[] for _ in range(n)]
    for i, j, w in zip(graph.pair_i.tolist(), graph.pair_j.tolist(), graph.pair_weight.tolist()):
        earlier[j].append((j - 1 - i, w))
    beta_t = 1.0 / temperature

    def energy_gain(k: int) -> np.ndarray:
        local = np.full(states, b[k])
        if earlier[k]:
            offsets = [p for p, _ in earlier[k]]
            weights = np.array([w for _, w in earlier[k]])
            local = local + state_spins[:, offsets] @ weights
        return local * beta_t

    def step(alpha: np.ndarray, gain: np.ndarray) -> np.ndarray:
        out = np.empty(states)
        view = out.reshape(half, 2)
        for x, s in ((0, -1.0), (1, 1.0)):
            contrib = alpha + s * gain
            view[:, x] = np.logaddexp(contrib[:half], contrib[half:])
        return out

    backward = None
    if magnetizations:
        backward = [None] * n
        message = np.zeros(states)
        backward[n - 1] = message
        for k in range(n - 1, 0, -1):
            gain = energy_gain(k)
            nxt = message.reshape(half, 2)
            lower = np.tile(nxt[:, 0], 2)
            upper = np.tile(nxt[:, 1], 2)
            message = np.logaddexp(lower - gain, upper + gain)
            backward[k - 1] = message

    alpha = np.full(states, -np.inf)
    alpha[0] = 0.0
    mags = np.zeros(n) if magnetizations else None
    for k in range(n):
        alpha = step(alpha, energy_gain(k))
        if magnetizations:
            total = alpha + backward[k]
            log_up = logsumexp(total[1::2])
            log_down = logsumexp(total[0::2])
            mags[k] = math.tanh(0.5 * (log_up - log_down))
    return ExactGibbsResult(region, float(logsumexp(alpha)), mags)


def solve_gibbs(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    magnetizations: bool = True,
) -> ExactGibbsResult:
    """
    Exact Gibbs state from whichever exact engine is cheaper.

    Enumeration costs about 2^n, the transfer sweep about n * 2^W.

    Raises:
        BudgetError: Neither exact engine fits the region.
    """
    _require_positive_temperature(params)
    b = external_field(region, bc, coupling, field, params)
    n = len(region)
    width = max(region_graph(region, coupling).bandwidth, 1)
    transfer_fits = width <= TRANSFER_WIDTH_BUDGET and (
        not magnetizations or n * (1 << width) <= TRANSFER_MEMORY_BUDGET
    )
    if n <= ENUMERATION_BUDGET and not (transfer_fits and n * (1 << width) * 4 < (1 << n)):
        return _enumerate(region, coupling, b, params.temperature)
    if not transfer_fits:
        raise BudgetError(
            f"no exact engine fits {n} sites at transfer width {width}"
        )
    return _transfer(region, coupling, b, params.temperature, magnetizations)


def exact_engine_fits(region: Region, coupling: CouplingSpec) -> bool:
    """True when solve_gibbs can handle region exactly."""
    if len(region) <= ENUMERATION_BUDGET:
        return True
    width = max(region_graph(region, coupling).bandwidth, 1)
    return width <= TRANSFER_WIDTH_BUDGET and len(region) * (1 << width) <= TRANSFER_MEMORY_BUDGET


def clamped_log_partition(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    fixed: Mapping[Site, int],
) -> float:
    """log of the partition function restricted to configurations agreeing with `fixed`."""
    _require_positive_temperature(params)
    reduced, reduced_bc, constant = clamp(region, bc, coupling, field, params, fixed)
    log_z = solve_gibbs(reduced, reduced_bc, coupling, field, params, magnetizations=False).log_partition
    return log_z - constant / params.temperature


def two_point(
    region: Region,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    u: Site,
    v: Site,
) -> float:
    """Exact <s_u s_v> by clamping s_u to each sign."""
    if u == v:
        return 1.0
    logs = []
    values = []
    for s in (PLUS, MINUS):
        reduced, reduced_bc, constant = clamp(region, bc, coupling, field, params, {u: s})
        result = solve_gibbs(reduced, reduced_bc, coupling, field, params)
        logs.append(result.log_partition - constant / params.temperature)
        values.append(s * result.magnetization_at(v))
    logs = np.array(logs)
    weights = np.exp(logs - logsumexp(logs))
    return float(weights @ np.array(values))


# =============================================================================
# Positive-temperature observables
# =============================================================================


def _require_scale(ell: int, field: FieldSample) -> Region:
    if ell < 1:
        raise DomainError(f"ell must be >= 1, got {ell}")
    region = ball(ORIGIN, 3 * ell)
    if not field.covers(region):
        raise DomainError(f"field region too small: it must cover ball(0, {3 * ell})")
    return region


def _chain_seed(settings: HeatBathSettings, field: FieldSample, salt: int) -> int:
    return int(keyed_bits(settings.chain_seed, field.seed, salt))


def plus_minus_magnetizations(
    region: Region,
    coupling: CouplingSpec,
    field: FieldSample,
    params: DisorderParams,
    engine: Engine = Engine.EXACT,
    settings: Optional[HeatBathSettings] = None,
    salt: int = 0,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """
    Magnetizations under uniform plus and minus boundaries.

    Returns:
        (plus, minus, per-sample differences or None). The third entry holds
        the (samples, n) plus-minus difference trace of the MCMC engine, used
        for batch-means errors of linear functionals.
    """
    _require_positive_temperature(params)
    engine = Engine(engine)
    if engine is Engine.EXACT:
        plus = solve_gibbs(region, BoundaryCondition.plus(region, coupling), coupling, field, params)
        minus = solve_gibbs(region, BoundaryCondition.minus(region, coupling), coupling, field, params)
        return plus.magnetization, minus.magnetization, None
    settings = settings or HeatBathSettings()
    run = coupled_heat_bath(
        region, coupling, field, params,
        sweeps=settings.sweeps,
        burn_in=settings.burn_in,
        chain_seed=_chain_seed(settings, field, salt),
        batches=settings.batches,
    )
    return run.plus.estimates, run.minus.estimates, run.difference_batches


def _weighted_difference(
    plus: np.ndarray,
    minus: np.ndarray,
    batches: Optional[np.ndarray],
    idx: np.ndarray,
    weights: np.ndarray,
) -> Tuple[float, float]:
    value = float(weights @ (plus[idx] - minus[idx]))
    if batches is None:
        return value, 0.0
    per_batch = batches[:, idx] @ weights
    if len(per_batch) < 2:
        return value, 0.0
    return value, float(np.std(per_batch, ddof=1) / math.sqrt(len(per_batch)))


def D_posT_estimate(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    engine: Engine = Engine.EXACT,
    settings: Optional[HeatBathSettings] = None,
) -> Tuple[float, float]:
    """(D_l at T > 0, standard error); the error is 0 for the exact engine."""
    region = _require_scale(ell, field)
    plus, minus, batches = plus_minus_magnetizations(region, coupling, field, params, engine, settings, salt=1)
    idx = region.indices(ball(ORIGIN, ell).sites)
    return _weighted_difference(plus, minus, batches, idx, np.full(len(idx), 0.5))


def D_posT(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    engine: Engine = Engine.EXACT,
    settings: Optional[HeatBathSettings] = None,
) -> float:
    """1/2 sum over Lambda(l) of <s_v>^{Lambda(3l),+} - <s_v>^{Lambda(3l),-}."""
    return D_posT_estimate(ell, field, params, coupling, engine, settings)[0]


def B_tilde(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    engine: Engine = Engine.EXACT,
    settings: Optional[HeatBathSettings] = None,
) -> float:
    """
    Boundary disagreement weight of the annulus Gibbs states.

    Nearest-neighbor couplings use (J/2) per boundary vertex of Lambda(2l);
    other couplings weight vertex v by J_v / 4, where J_v sums the couplings
    from v into Lambda(2l).

    Raises:
        DomainError: ell < R(J).
    """
    _require_scale(ell, field)
    if ell < coupling.range:
        raise DomainError(f"B_tilde requires ell >= R(J) = {coupling.range}, got {ell}")
    region = annulus(ell)
    inner = ball(ORIGIN, 2 * ell)
    boundary = sorted(vertex_boundary(inner, coupling))
    if coupling.is_nearest_neighbor:
        weights = np.full(len(boundary), 0.5 * coupling.nn_strength)
    else:
        inside = inner.site_set
        weights = np.array([
            0.25 * sum(J for u, J in coupling.neighbors(v) if u in inside) for v in boundary
        ])
    plus, minus, batches = plus_minus_magnetizations(region, coupling, field, params, engine, settings, salt=2)
    idx = region.indices(boundary)
    return _weighted_difference(plus, minus, batches, idx, weights)[0]


def annulus_log_partitions(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    fixed: Optional[Mapping[Site, int]] = None,
) -> Tuple[float, float, float, float]:
    """log Z^{s,s'} for (++, --, +-, -+), optionally with spins clamped."""
    _require_scale(ell, field)
    region = annulus(ell)
    out = []
    for s_outer, s_inner in ((PLUS, PLUS), (MINUS, MINUS), (PLUS, MINUS), (MINUS, PLUS)):
        bc = BoundaryCondition.mixed(ell, s_outer, s_inner, coupling)
        if fixed:
            out.append(clamped_log_partition(region, bc, coupling, field, params, fixed))
        else:
            out.append(solve_gibbs(region, bc, coupling, field, params, magnetizations=False).log_partition)
    return tuple(out)


def surface_tension_posT_exact(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
) -> float:
    """T [log Z++ + log Z-- - log Z+- - log Z-+] over the annulus."""
    _require_positive_temperature(params)
    lpp, lmm, lpm, lmp = annulus_log_partitions(ell, field, params, coupling)
    return params.temperature * (lpp + lmm - lpm - lmp)


def cross_ratio_check(
    tau: Mapping[Site, int],
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    ell: int = 1,
) -> Tuple[float, float]:
    """
    Both sides of Z++_tau Z--_tau = Z+-_tau Z-+_tau in log form.

    Args:
        tau: Spins on the vertex boundary of Lambda(2l), clamped inside the annulus.

    Returns:
        (log Z++ + log Z--, log Z+- + log Z-+)
    """
    _require_positive_temperature(params)
    separator = vertex_boundary(ball(ORIGIN, 2 * ell), coupling)
    if set(tau) != separator:
        raise DomainError("tau must assign every vertex-boundary site of Lambda(2l)")
    if not separator <= annulus(ell).site_set:
        raise DomainError(f"cross ratio requires ell >= R(J) = {coupling.range}")
    lpp, lmm, lpm, lmp = annulus_log_partitions(ell, field, params, coupling, fixed=tau)
    return lpp + lmm, lpm + lmp


# =============================================================================
# Integral representation
# =============================================================================


@dataclass(frozen=True)
class IntegralResult:
    """
    2 eps * int D(eta^{(t)}) dt by trapezoid refinement.

    Attributes:
        value: The surface-tension estimate.
        std_error: Propagated Monte Carlo error (0 for the exact engine).
        achieved_tolerance: Last relative change between refinements.
        converged: Whether the target tolerance was met.
        evaluations: Number of integrand evaluations.
        t_max: Half-width of the integration window.
    """
    value: float
    std_error: float
    achieved_tolerance: float
    converged: bool
    evaluations: int
    t_max: float


def surface_tension_posT_integral(
    ell: int,
    field: FieldSample,
    params: DisorderParams,
    coupling: CouplingSpec,
    engine: Engine = Engine.EXACT,
    settings: Optional[HeatBathSettings] = None,
    rtol: float = 1e-4,
    initial_intervals: int = 32,
    max_refinements: int = 10,
) -> IntegralResult:
    """
    Integral representation of the positive-temperature surface tension.

    The window [-t_max, t_max] extends the forcing shift by 20 T / eps, beyond
    which the integrand is below exp(-40). The exact engine doubles the
    trapezoid grid until successive Richardson estimates agree to rtol; the
    MCMC engine stops once the change falls below twice the combined error.
    """
    _require_positive_temperature(params)
    if params.epsilon <= 0:
        raise DomainError("integral representation needs epsilon > 0")
    _require_scale(ell, field)
    engine = Engine(engine)
    inner = ball(ORIGIN, ell)
    eta = field.on(inner)
    reach = coupling.forcing_bound + abs(params.h) + params.epsilon * float(np.max(np.abs(eta)))
    t_max = (reach + 20.0 * params.temperature) / params.epsilon
    evaluations = 0

    def integrand(t: float) -> Tuple[float, float]:
        nonlocal evaluations
        evaluations += 1
        shifted = shift_field(field, inner, t)
        return D_posT_estimate(ell, shifted, params, coupling, engine, settings)

    n = initial_intervals
    nodes = np.linspace(-t_max, t_max, n + 1)
    values = [integrand(t) for t in nodes]
    f = np.array([v[0] for v in values])
    e = np.array([v[1] for v in values])
    h = 2.0 * t_max / n
    trap = h * (f.sum() - 0.5 * (f[0] + f[-1]))
    err_sq = h * h * (np.sum(e ** 2) - 0.75 * (e[0] ** 2 + e[-1] ** 2))
    estimate = trap
    change = math.inf
    converged = False
    for _ in range(max_refinements):
        mids = nodes[:-1] + 0.5 * h
        mid_values = [integrand(t) for t in mids]
        fm = np.array([v[0] for v in mid_values])
        em = np.array([v[1] for v in mid_values])
        h *= 0.5
        new_trap = 0.5 * trap + h * fm.sum()
        err_sq = 0.25 * err_sq + h * h * np.sum(em ** 2)
        merged = np.empty(2 * len(nodes) - 1)
        merged[0::2], merged[1::2] = nodes, mids
        nodes = merged
        if engine is Engine.EXACT:
            new_estimate = new_trap + (new_trap - trap) / 3.0
            change = abs(new_estimate - estimate) / max(abs(new_estimate), 1e-300)
            trap, estimate = new_trap, new_estimate
            if change < rtol or new_estimate == 0.0:
                converged = True
                break
        else:
            delta = abs(new_trap - trap)
            change = delta / max(abs(new_trap), 1e-300)
            limit = 2.0 * math.sqrt(max(err_sq, 0.0))
            trap, estimate = new_trap, new_trap
            if delta <= limit or change < rtol:
                converged = True
                break
    if not converged:
        logger.warning(
            f"tension integral at ell={ell} stopped at relative change {change:.3g} "
            f"after {evaluations} evaluations"
        )
    scale = 2.0 * params.epsilon
    return IntegralResult(
        value=scale * estimate,
        std_error=scale * math.sqrt(max(err_sq, 0.0)),
        achieved_tolerance=change,
        converged=converged,
        evaluations=evaluations,
        t_max=t_max,
    )
