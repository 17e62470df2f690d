"""
verify.py - Verification suite

Runs the oracle, monotonicity, identity and inequality checks the library
promises and reports one row per claim:

    claim     what is checked
    anchor    the statement it belongs to
    verdict   PASS / FAIL / INCONCLUSIVE
    detail    margin, counts or note

Statistical claims are measured through run() on small experiment configs, so
the suite exercises the same code paths as the CLI. Deterministic claims
(oracle equivalence, monotonicity, stretch construction, variational minimum,
thread independence) are checked directly.

Levels:
    quick - a few replicas per claim, for a fresh checkout (about two minutes)
    full  - the acceptance sizes (up to an hour)

Usage:
    from rfim_lab.verify import verify_suite

    report = verify_suite("quick")
    print(report.passed)
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy import stats

from rfim_lab.bounds import (
    comp_decay_stretch,
    greedy_grid_minimum,
    indicator_constraint,
    min_integral_value,
    stretch_holds,
)
from rfim_lab.config import ExperimentConfig, ExperimentKind
from rfim_lab.disorder import STREAM_REPLICA, DisorderParams, keyed_uniform, replica_seed, sample_field
from rfim_lab.estimators import BoundCheck, Verdict
from rfim_lab.experiments import run
from rfim_lab.gibbs import solve_gibbs
from rfim_lab.groundstate import enumerate_ground_state, minimize
from rfim_lab.lattice import ORIGIN, CouplingSpec, Region, annulus, ball, box, vertex_boundary
from rfim_lab.model import MINUS, PLUS, BoundaryCondition
from rfim_lab.records import rows_to_csv

logger = logging.getLogger(__name__)

ORACLE_ENERGY_TOL = 1e-9
ORACLE_GAP_TOL = 1e-7
MONOTONE_TOL = 1e-12

# Sizes per level
LEVELS: Dict[str, Dict[str, object]] = {
    "quick": {
        "oracle_instances": 25,
        "tension_scales": [1, 2],
        "tension_epsilons": [1.0],
        "tension_replicas": 40,
        "monotone_instances": 25,
        "post_temperatures": [1.0],
        "post_replicas": 8,
        "variance_scales": [1],
        "variance_replicas": 200,
        "covariance_scales": [2],
        "covariance_replicas": 100,
        "high_disorder_scales": [1, 2, 3, 4],
        "high_disorder_replicas": 200,
        "curdling_levels": 2,
        "curdling_replicas": 5,
        "mandelbrot_levels": 3,
        "mandelbrot_samples": 300,
        "stretch_trials": 20,
        "stretch_k": [10, 100, 1000],
        "variational_trials": 100,
        "reproducibility_replicas": 6,
    },
    "full": {
        "oracle_instances": 200,
        "tension_scales": [1, 2, 3, 4],
        "tension_epsilons": [0.5, 1.0, 2.0, 4.0],
        "tension_replicas": 500,
        "monotone_instances": 200,
        "post_temperatures": [0.5, 1.0, 2.0],
        "post_replicas": 100,
        "variance_scales": [1, 2],
        "variance_replicas": 10000,
        "covariance_scales": [2, 3],
        "covariance_replicas": 2000,
        "high_disorder_scales": [1, 2, 4, 8, 16],
        "high_disorder_replicas": 2000,
        "curdling_levels": 3,
        "curdling_replicas": 20,
        "mandelbrot_levels": 4,
        "mandelbrot_samples": 2000,
        "stretch_trials": 100,
        "stretch_k": [10, 100, 1000, 10000],
        "variational_trials": 1000,
        "reproducibility_replicas": 20,
    },
}

# Disorder strength of the high-disorder claim: P(|eta| <= 4/8) ~ 0.38 < 0.55
HIGH_DISORDER_EPSILON = 8.0


@dataclass(frozen=True)
class VerifyRow:
    """One verified claim."""
    claim: str
    anchor: str
    verdict: Verdict
    detail: str = ""


@dataclass
class VerifyReport:
    """Rows of a verify_suite run."""
    level: str
    rows: List[VerifyRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.verdict != Verdict.FAIL for r in self.rows)

    def counts(self) -> Dict[str, int]:
        counts = {v.value: 0 for v in Verdict}
        for r in self.rows:
            counts[r.verdict.value] += 1
        return counts

    def add_check(self, check: BoundCheck, anchor: str) -> None:
        detail = f"observed={check.observed:.6g} bound={check.bound:.6g} margin={check.margin:.3g}"
        if check.note:
            detail += f" ({check.note})"
        self.rows.append(VerifyRow(check.name, anchor, check.verdict, detail))


def _random_boundary(region: Region, coupling: CouplingSpec, seed: int) -> BoundaryCondition:
    sites = sorted(vertex_boundary(region, coupling))
    u = keyed_uniform(STREAM_REPLICA, seed, np.arange(len(sites)))
    return BoundaryCondition({s: (PLUS if x < 0.5 else MINUS) for s, x in zip(sites, u)}, "random")


def _base_config(**values) -> ExperimentConfig:
    """Config independent of the environment, with no output directory."""
    return replace(ExperimentConfig(), out="", **values)


# =============================================================================
# Oracle equivalence and monotonicity
# =============================================================================


def check_oracle(instances: int, coupling: CouplingSpec = CouplingSpec.nearest_neighbor(1.0)) -> List[VerifyRow]:
    """minimize() against exhaustive enumeration on three region families."""
    rows = []
    families = (("ball(0,2)", ball(ORIGIN, 2)), ("4x4 box", box(0, 0, 4)), ("annulus(1)", annulus(1)))
    for name, region in families:
        bad = 0
        for i in range(instances):
            seed = replica_seed(0x0AC1E, i)
            sample = sample_field(region, seed)
            h = 2.0 * float(keyed_uniform(STREAM_REPLICA, seed, 1)) - 1.0
            params = DisorderParams(h, 1.0, 0.0)
            bc = _random_boundary(region, coupling, seed)
            fast = minimize(region, bc, coupling, sample, params, check_degeneracy=False)
            slow, second = enumerate_ground_state(region, bc, coupling, sample, params)
            energy_ok = abs(fast.energy - slow.energy) <= ORACLE_ENERGY_TOL * max(1.0, abs(slow.energy))
            config_ok = second - slow.energy <= ORACLE_GAP_TOL or np.array_equal(fast.spins, slow.spins)
            if not (energy_ok and config_ok):
                bad += 1
                logger.error(f"oracle mismatch on {name}, instance {i}: {fast.energy!r} vs {slow.energy!r}")
        verdict = Verdict.PASS if bad == 0 else Verdict.FAIL
        rows.append(VerifyRow(
            f"min-cut ground state = enumeration on {name}", "exact ground states",
            verdict, f"{bad} mismatches in {instances} instances",
        ))
    return rows


def check_monotonicity(instances: int, coupling: CouplingSpec = CouplingSpec.nearest_neighbor(1.0)) -> List[VerifyRow]:
    """Boundary, domain and field-shift monotonicity at T = 0 and T > 0."""
    small, large = ball(ORIGIN, 2), ball(ORIGIN, 4)
    inner = small.indices(small.sites)
    inside_large = large.indices(small.sites)
    counts = {"boundary": 0, "domain": 0, "field": 0, "boundary T>0": 0, "domain T>0": 0}
    for i in range(instances):
        seed = replica_seed(0xF0C6, i)
        sample = sample_field(large, seed)
        params = DisorderParams(0.0, 1.0, 0.0)
        plus = minimize(small, BoundaryCondition.plus(small, coupling), coupling, sample, params, False).spins
        minus = minimize(small, BoundaryCondition.minus(small, coupling), coupling, sample, params, False).spins
        counts["boundary"] += int(np.any(minus > plus))
        outer = minimize(large, BoundaryCondition.plus(large, coupling), coupling, sample, params, False).spins
        counts["domain"] += int(np.any(outer[inside_large] > plus[inner]))
        shifted = minimize(
            small, BoundaryCondition.plus(small, coupling), coupling, sample,
            DisorderParams(0.5, 1.0, 0.0), False,
        ).spins
        counts["field"] += int(np.any(plus > shifted))

        hot = DisorderParams(0.0, 1.0, 1.0)
        m_plus = solve_gibbs(small, BoundaryCondition.plus(small, coupling), coupling, sample, hot).magnetization
        m_minus = solve_gibbs(small, BoundaryCondition.minus(small, coupling), coupling, sample, hot).magnetization
        counts["boundary T>0"] += int(np.any(m_minus > m_plus + MONOTONE_TOL))
        tiny = ball(ORIGIN, 1)
        m_tiny = solve_gibbs(tiny, BoundaryCondition.plus(tiny, coupling), coupling, sample, hot).magnetization
        counts["domain T>0"] += int(np.any(m_plus[small.indices(tiny.sites)] > m_tiny + MONOTONE_TOL))

    claims = {
        "boundary": "sigma^{-} <= sigma^{+} pointwise (T = 0)",
        "domain": "sigma^{Lambda',+} <= sigma^{Lambda,+} on Lambda subset Lambda' (T = 0)",
        "field": "ground state non-decreasing under h -> h + 1/2",
        "boundary T>0": "<s>^- <= <s>^+ pointwise (T > 0)",
        "domain T>0": "<s>^{Lambda',+} <= <s>^{Lambda,+} on Lambda subset Lambda' (T > 0)",
    }
    rows = []
    for key, claim in claims.items():
        verdict = Verdict.PASS if counts[key] == 0 else Verdict.FAIL
        rows.append(VerifyRow(claim, "FKG / monotonicity", verdict, f"{counts[key]} violations in {instances} instances"))
    return rows


# =============================================================================
# Deterministic utilities
# =============================================================================


def check_stretch(trials: int, ks: Sequence[int], alpha: float = 0.2) -> List[VerifyRow]:
    """comp_decay_stretch on random admissible sequences: sqrt(k) <= n <= k and the scan holds."""
    rows = []
    for k in ks:
        floor = k ** (-alpha)
        bad = 0
        for t in range(trials):
            u = keyed_uniform(STREAM_REPLICA, 0x57E7C4, k, t, np.arange(k))
            p = np.sort(floor + (1.0 - floor) * u ** (1.0 + 3.0 * u[0]))[::-1]
            n = comp_decay_stretch(p, alpha, k).n
            if not (math.sqrt(k) <= n <= k and stretch_holds(p, alpha, n)):
                bad += 1
        verdict = Verdict.PASS if bad == 0 else Verdict.FAIL
        rows.append(VerifyRow(
            f"stretch construction, k = {k}", "comparable stretch", verdict,
            f"{bad} violations in {trials} sequences",
        ))
    return rows


def check_variational(trials: int) -> List[VerifyRow]:
    """min_integral_value against the indicator constraint and random feasible grid functions."""
    x = np.linspace(-12.0, 12.0, 4801)
    dx = float(x[1] - x[0])
    w = stats.norm.pdf(x)
    rows = []
    for p in (0.5, 0.8, 0.95):
        q, value = min_integral_value(p)
        target = 1.0 - p
        constraint_gap = abs(indicator_constraint(q) - target)
        greedy, _ = greedy_grid_minimum(w, dx, target)
        beaten = 0
        for t in range(trials):
            u = keyed_uniform(STREAM_REPLICA, 0x7A41, t, np.arange(len(x)))
            f = 0.5 + 0.5 * u
            f *= target / float(np.sum(f * w) * dx)
            if float(np.sum(f) * dx) < value - 4.0 * dx:
                beaten += 1
        ok = constraint_gap <= 1e-8 and abs(greedy - value) <= 4.0 * dx and beaten == 0
        rows.append(VerifyRow(
            f"min integral = 2q at p = {p:g}", "variational minimum",
            Verdict.PASS if ok else Verdict.FAIL,
            f"2q={value:.6g} grid={greedy:.6g} |constraint gap|={constraint_gap:.2g} beaten={beaten}/{trials}",
        ))
    return rows


# =============================================================================
# Reproducibility
# =============================================================================


def check_reproducibility(replicas: int) -> List[VerifyRow]:
    """Identical CSV bodies across reruns and across worker counts."""
    config = _base_config(kind=ExperimentKind.M_SCAN, scales=[1, 2, 4], replicas=replicas, seed=11)
    bodies = []
    for threads in (1, 1, 2):
        record = run(replace(config, threads=threads), write=False)
        bodies.append(rows_to_csv(record.rows, record.config_hash))
    rows = [
        VerifyRow("rerun gives byte-identical results.csv", "reproducibility",
                  Verdict.PASS if bodies[0] == bodies[1] else Verdict.FAIL),
        VerifyRow("1 and 2 workers give byte-identical results.csv", "reproducibility",
                  Verdict.PASS if bodies[0] == bodies[2] else Verdict.FAIL),
    ]
    return rows


# =============================================================================
# Statistical claims through run()
# =============================================================================


def _experiments(sizes: Dict[str, object]) -> List[Tuple[str, ExperimentConfig]]:
    plan: List[Tuple[str, ExperimentConfig]] = []
    for eps in sizes["tension_epsilons"]:
        plan.append(("surface tension at T = 0", _base_config(
            kind=ExperimentKind.SURFACE_TENSION, epsilon=eps,
            scales=list(sizes["tension_scales"]), replicas=sizes["tension_replicas"], seed=1,
        )))
    for temperature in sizes["post_temperatures"]:
        plan.append(("surface tension at T > 0", _base_config(
            kind=ExperimentKind.POST, temperature=temperature, scales=[1],
            replicas=sizes["post_replicas"], seed=2,
        )))
    plan.append(("anti-concentration of D_l", _base_config(
        kind=ExperimentKind.VARIANCE, scales=list(sizes["variance_scales"]),
        replicas=sizes["variance_replicas"], seed=3,
    )))
    scales = list(sizes["covariance_scales"])
    plan.append(("covariance decoupling", _base_config(
        kind=ExperimentKind.COVARIANCE, scales=scales, distance=2 * max(scales) + 1,
        replicas=sizes["covariance_replicas"], seed=4,
    )))
    plan.append(("covariance decoupling", _base_config(
        kind=ExperimentKind.COVARIANCE, temperature=1.0, scales=[1], distance=3,
        replicas=sizes["covariance_replicas"], seed=4,
    )))
    plan.append(("high-disorder regime", _base_config(
        kind=ExperimentKind.HIGH_DISORDER, epsilon=HIGH_DISORDER_EPSILON,
        scales=list(sizes["high_disorder_scales"]), replicas=sizes["high_disorder_replicas"], seed=5,
    )))
    plan.append(("large fields and curdling", _base_config(
        kind=ExperimentKind.CURDLING, epsilon=2.0, levels=sizes["curdling_levels"],
        replicas=sizes["curdling_replicas"], seed=6,
    )))
    plan.append(("Mandelbrot percolation", _base_config(
        kind=ExperimentKind.MANDELBROT, levels=sizes["mandelbrot_levels"], p_grid=[0.1, 0.3, 0.5],
        replicas=sizes["mandelbrot_samples"], seed=7,
    )))
    return plan


def verify_suite(level: str = "quick", progress: Callable[[str], None] = logger.info) -> VerifyReport:
    """
    Run every verification group at the given level.

    Args:
        level: "quick" or "full".
        progress: Called with the name of each group as it starts.

    Returns:
        VerifyReport: One row per claim.

    Raises:
        ValueError: Unknown level.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown verify level {level!r}; expected one of {sorted(LEVELS)}")
    sizes = LEVELS[level]
    report = VerifyReport(level)

    progress("oracle equivalence")
    report.rows.extend(check_oracle(sizes["oracle_instances"]))
    progress("monotonicity")
    report.rows.extend(check_monotonicity(sizes["monotone_instances"]))
    progress("stretch construction")
    report.rows.extend(check_stretch(sizes["stretch_trials"], sizes["stretch_k"]))
    progress("variational minimum")
    report.rows.extend(check_variational(sizes["variational_trials"]))

    for anchor, config in _experiments(sizes):
        progress(f"{anchor}: {config}")
        record = run(config, write=False)
        for check in record.checks:
            report.add_check(check, anchor)
        if record.failed_replicas:
            report.rows.append(VerifyRow(
                f"{config.kind.value}: no failed replicas", anchor, Verdict.FAIL,
                f"{len(record.failed_replicas)} failures, first: {record.failed_replicas[0]}",
            ))

    progress("reproducibility")
    report.rows.extend(check_reproducibility(sizes["reproducibility_replicas"]))

    counts = report.counts()
    logger.info(f"verify ({level}): {counts}")
    return report
