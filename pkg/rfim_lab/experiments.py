"""
experiments.py - run(config) dispatch

Each experiment kind has one runner that calls into the library, collects
rows in the results.csv schema, inequality checks with verdicts, and fit
payloads, and hands them back as an ExperimentOutcome. run() validates the
config before any computation, times the runner, builds the ResultRecord
and writes it when an output directory is set.

Samplewise identities (T <= 4B, the threshold representation, the cross
ratio) are reported as violation counts checked against zero.

Usage:
    from rfim_lab.config import ExperimentConfig
    from rfim_lab.experiments import run

    record = run(ExperimentConfig.from_args(kind="m-scan", replicas=500, out="results/mscan"))
    print(record.passed)
"""

import logging
import math
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from rfim_lab import __version__
from rfim_lab.config import ExperimentConfig, ExperimentKind, config_hash, require_valid
from rfim_lab.disorder import STREAM_REPLICA, DisorderParams, keyed_uniform, replica_seed, sample_field
from rfim_lab.errors import DomainError
from rfim_lab.estimators import (
    BoundCheck,
    Estimate,
    _mean_and_error,
    check_upper,
    covariance_bounds,
    decay_fit,
    inconclusive,
    m_scan,
    replica_field,
    var_bound_report,
    variance_D,
)
from rfim_lab.gibbs import (
    Engine,
    B_tilde,
    cross_ratio_check,
    surface_tension_posT_exact,
    surface_tension_posT_integral,
)
from rfim_lab.groundstate import B, D, G, avalanche_scan, avalanche_summary, flip_thresholds, surface_tension_T0
from rfim_lab.hierarchical import (
    RESIDUAL,
    block_density,
    curdle,
    curdling_accuracy,
    exceptional_percolation,
    high_disorder_check,
    large_field_frequency,
)
from rfim_lab.lattice import ORIGIN, CouplingSpec, Site, ball, box, vertex_boundary
from rfim_lab.mandelbrot import mandelbrot_scan
from rfim_lab.model import MINUS, PLUS
from rfim_lab.records import ResultRecord, write_record
from rfim_lab.replicas import run_replicas

logger = logging.getLogger(__name__)

SAMPLEWISE_TOL = 1e-9
THRESHOLD_REL_TOL = 1e-5
INTEGRAL_REL_TOL = 1e-3
CROSS_RATIO_TOL = 1e-9


@dataclass
class ExperimentOutcome:
    """What a runner hands back to run()."""
    rows: List[Dict[str, Any]] = field(default_factory=list)
    checks: List[BoundCheck] = field(default_factory=list)
    fits: Dict[str, Any] = field(default_factory=dict)
    failed: List[Any] = field(default_factory=list)
    grid: Optional[str] = None

    def add_row(self, scale: int, statistic: str, estimate: Estimate, seed: int) -> None:
        self.rows.append({
            "scale": scale, "statistic": statistic, "mean": estimate.mean,
            "std_err": estimate.std_error, "replicas": estimate.replicas, "seed": seed,
        })


def _estimate(values: np.ndarray) -> Estimate:
    return Estimate(*_mean_and_error(np.asarray(values, dtype=float)), len(values))


def _violations(name: str, count: int, total: int) -> BoundCheck:
    return check_upper(name, float(count), 0.0, 0.0, f"{count} of {total} samples")


def _failures(batch, label: str) -> List[Any]:
    return [{"experiment": label, "replica": i, "error": e} for i, e in batch.failed]


# =============================================================================
# m-scan
# =============================================================================


def _run_m_scan(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    series = m_scan(
        config.scales, config.params, config.coupling, config.replicas, config.seed,
        config.engine, config.settings, config.threads,
    )
    out.rows.extend(series.to_rows())
    out.failed.extend({"experiment": "m", "replica": i} for i in series.failed)
    if config.params.is_zero_temperature or config.engine == Engine.EXACT:
        out.checks.append(_violations(
            "m(L) non-increasing in L, replica by replica", series.monotone_violations, min(series.replicas),
        ))
    try:
        out.fits["decay"] = decay_fit(series).to_dict()
    except DomainError as e:
        logger.warning(f"decay fit skipped: {e}")
        out.fits["decay"] = {"skipped": str(e)}
    if config.coupling.is_nearest_neighbor:
        report = high_disorder_check(config.params, config.coupling)
        out.fits["high_disorder"] = {
            "exceptional_prob": report.exceptional_prob,
            "threshold": report.threshold,
            "verdict": report.verdict,
            "provenance": report.provenance,
        }
    return out


# =============================================================================
# Surface tension at T = 0
# =============================================================================


def _tension_task(
    index: int, ell: int, params: DisorderParams, coupling: CouplingSpec, seed: int,
) -> Tuple[float, float, float, float, float]:
    sample = replica_field(seed, index, 3 * ell)
    tension = surface_tension_T0(ell, sample, params, coupling)
    b = B(ell, sample, params, coupling) if ell >= coupling.range else math.nan
    g = G(ell, sample, params, coupling)
    d = float(D(ell, sample, params, coupling))
    representation = math.nan
    if params.epsilon > 0:
        representation = flip_thresholds(ell, sample, params, coupling).surface_tension(params.epsilon)
    return tension, b, g, d, representation


def _run_surface_tension(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    params = DisorderParams(config.h, config.epsilon, 0.0)
    for ell in config.scales:
        task = partial(_tension_task, ell=ell, params=params, coupling=config.coupling, seed=config.seed)
        batch = run_replicas(task, config.replicas, config.threads)
        out.failed.extend(_failures(batch, f"tension(l={ell})"))
        values = np.array(batch.values, dtype=float).reshape(-1, 5)
        tension, b, g, d, representation = values.T
        for name, column in (("T", tension), ("B", b), ("G", g), ("D", d)):
            if not np.all(np.isnan(column)):
                out.add_row(ell, name, _estimate(column), config.seed)
        n = len(values)
        if not np.all(np.isnan(b)):
            bad = int(np.sum(tension > 4.0 * b + SAMPLEWISE_TOL))
            out.checks.append(_violations(f"T_l <= 4 B_l samplewise (l={ell})", bad, n))
        if params.epsilon > 0:
            gap = np.abs(tension - representation)
            bad = int(np.sum(gap > THRESHOLD_REL_TOL * np.maximum(1.0, np.abs(tension))))
            out.checks.append(_violations(f"T_l = 2 eps sum(t- - t+) (l={ell})", bad, n))
            out.fits[f"threshold_gap_max(l={ell})"] = float(gap.max()) if n else math.nan
    return out


# =============================================================================
# Variance of D
# =============================================================================


def _run_variance(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    for ell in config.scales:
        report = variance_D(
            ell, config.params, config.coupling, config.replicas, config.seed,
            config.engine, config.settings, config.threads,
        )
        out.failed.extend({"experiment": f"variance(l={ell})", "replica": i} for i in report.failed)
        out.add_row(ell, "mean_D", Estimate(report.mean_D, report.se_mean_D, report.replicas), config.seed)
        out.add_row(ell, "var_D", Estimate(report.var_D, math.nan, report.replicas), config.seed)
        out.add_row(ell, "P(D < E(D)/2)", report.anti_concentration, config.seed)
        out.add_row(ell, "mean_B", report.mean_B, config.seed)
        out.checks.extend(report.checks)
        out.fits[f"variance(l={ell})"] = {
            "chi_bound": report.chi_bound,
            "direct_bound": report.direct_bound,
            "degenerate": report.degenerate,
        }
        if config.alpha is not None:
            series = m_scan(
                list(range(1, 4 * ell + 1)), config.params, config.coupling, config.replicas,
                config.seed, config.engine, config.settings, config.threads,
            )
            bound = var_bound_report(series, ell, config.alpha, report.mean_D, report.var_D)
            out.checks.extend(bound.checks)
            out.fits[f"var_bound(l={ell})"] = {
                "L": bound.L, "ratio": bound.ratio,
                "hypotheses_hold": bound.hypotheses_hold, "note": bound.note,
            }
    return out


# =============================================================================
# Covariance decoupling
# =============================================================================


def _run_covariance(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    u, v = ORIGIN, Site(config.distance, 0)
    for ell in config.scales:
        report = covariance_bounds(
            u, v, ell, config.params, config.coupling, config.replicas, config.seed,
            config.engine, config.settings, config.threads,
        )
        out.add_row(ell, "truncated", report.truncated, config.seed)
        out.add_row(ell, "covariance", report.covariance, config.seed)
        out.add_row(ell, "m_hat", report.m_hat, config.seed)
        out.checks.extend(report.checks)
        out.fits[f"proxy(l={ell})"] = report.proxy
        out.failed.extend({"experiment": f"covariance(l={ell})", "replica": i} for i in report.truncated.failed)
    return out


# =============================================================================
# Positive temperature
# =============================================================================


def _random_separator_spins(ell: int, coupling: CouplingSpec, seed: int) -> Dict[Site, int]:
    sites = sorted(vertex_boundary(ball(ORIGIN, 2 * ell), coupling))
    xs = np.array([s.x for s in sites])
    ys = np.array([s.y for s in sites])
    u = keyed_uniform(STREAM_REPLICA, seed, xs, ys)
    return {s: (PLUS if x < 0.5 else MINUS) for s, x in zip(sites, u)}


def _post_task(
    index: int, ell: int, params: DisorderParams, coupling: CouplingSpec, seed: int,
    engine: Engine, settings,
) -> Tuple[float, float, float, float, float, float]:
    sample = replica_field(seed, index, 3 * ell)
    exact = surface_tension_posT_exact(ell, sample, params, coupling)
    b_tilde = cross = math.nan
    if ell >= coupling.range:
        b_tilde = B_tilde(ell, sample, params, coupling, engine, settings)
        tau = _random_separator_spins(ell, coupling, replica_seed(seed, index))
        left, right = cross_ratio_check(tau, sample, params, coupling, ell)
        cross = left - right
    value, error, converged = math.nan, math.nan, 0.0
    if params.epsilon > 0:
        integral = surface_tension_posT_integral(ell, sample, params, coupling, engine, settings)
        value, error, converged = integral.value, integral.std_error, float(integral.converged)
    return exact, b_tilde, value, error, converged, cross


def _run_post(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    for ell in config.scales:
        task = partial(
            _post_task, ell=ell, params=config.params, coupling=config.coupling, seed=config.seed,
            engine=config.engine, settings=config.settings,
        )
        batch = run_replicas(task, config.replicas, config.threads)
        out.failed.extend(_failures(batch, f"posT(l={ell})"))
        values = np.array(batch.values, dtype=float).reshape(-1, 6)
        exact, b_tilde, integral, integral_se, converged, cross = values.T
        n = len(values)
        out.add_row(ell, "T_posT", _estimate(exact), config.seed)
        if not np.all(np.isnan(b_tilde)):
            out.add_row(ell, "B_tilde", _estimate(b_tilde), config.seed)
            bad = int(np.sum(exact > 8.0 * b_tilde + SAMPLEWISE_TOL))
            out.checks.append(_violations(f"T_l <= 8 B~_l samplewise (l={ell})", bad, n))
            out.checks.append(_violations(
                f"cross ratio Z++ Z-- = Z+- Z-+ (l={ell})", int(np.sum(np.abs(cross) > CROSS_RATIO_TOL)), n,
            ))
        if config.epsilon > 0 and n:
            out.add_row(ell, "T_posT_integral", _estimate(integral), config.seed)
            gap = np.abs(integral - exact)
            if config.engine == Engine.EXACT:
                allowed = INTEGRAL_REL_TOL * np.maximum(np.abs(exact), 1e-12)
            else:
                allowed = 3.0 * integral_se + INTEGRAL_REL_TOL * np.abs(exact)
            bad = int(np.sum(gap > allowed))
            out.checks.append(_violations(f"integral representation = exact (l={ell})", bad, n))
            out.fits[f"integral(l={ell})"] = {
                "max_gap": float(gap.max()),
                "unconverged": int(n - converged.sum()),
            }
    return out


# =============================================================================
# Curdling
# =============================================================================


def _curdling_task(
    index: int, levels: int, params: DisorderParams, coupling: CouplingSpec, seed: int,
) -> Tuple[float, float, float, float, str]:
    window = box(0, 0, 3 ** levels)
    sample = sample_field(window, replica_seed(seed, index))
    plus = curdle(window, sample, params, levels, coupling, PLUS)
    minus = curdle(window, sample, params, levels, coupling, MINUS)
    accuracy = curdling_accuracy(plus, sample, params, coupling)
    interior = (plus.source != RESIDUAL) & (minus.source != RESIDUAL)
    flips = int(np.sum(plus.tau[interior] != minus.tau[interior]))
    return accuracy.agreement, plus.capped_fraction, float(accuracy.forced_mismatches), float(flips), plus.to_grid_text()


def _run_curdling(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    params = DisorderParams(config.h, config.epsilon, 0.0)
    task = partial(_curdling_task, levels=config.levels, params=params, coupling=config.coupling, seed=config.seed)
    batch = run_replicas(task, config.replicas, config.threads)
    out.failed.extend(_failures(batch, "curdling"))
    values = batch.values
    n = len(values)
    agreement = np.array([v[0] for v in values])
    capped = np.array([v[1] for v in values])
    mismatches = int(sum(v[2] for v in values))
    flips = int(sum(v[3] for v in values))
    out.add_row(config.levels, "tau_ground_state_agreement", _estimate(agreement), config.seed)
    out.add_row(config.levels, "capped_fraction", _estimate(capped), config.seed)
    out.checks.append(_violations("tau = sign(h + eps eta) at forced sites", mismatches, n))
    out.checks.append(_violations("tau inside closed circuits independent of the window boundary", flips, n))
    if values:
        out.grid = values[0][4]

    for level in range(min(2, config.levels) + 1):
        estimate, check = large_field_frequency(
            level, params, config.coupling, max(config.replicas, 1000), config.seed, config.threads,
        )
        out.add_row(level, "large_field_frequency", estimate, config.seed)
        if config.h == 0:
            out.checks.append(check)
        else:
            out.checks.append(inconclusive(check.name, check.observed, check.bound, "closed form holds at h = 0"))
    return out


# =============================================================================
# Mandelbrot percolation
# =============================================================================


def _run_mandelbrot(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    results, increases = mandelbrot_scan(config.p_grid, config.levels, config.replicas, config.seed, config.threads)
    for stats in results:
        out.rows.extend(stats.to_rows())
        out.checks.append(stats.area_check())
    out.checks.append(_violations("crossing probability non-increasing in p", increases, len(results)))
    return out


# =============================================================================
# High disorder
# =============================================================================


def _run_high_disorder(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    params = DisorderParams(config.h, config.epsilon, 0.0)
    report = high_disorder_check(params, config.coupling)
    out.fits["high_disorder"] = {
        "exceptional_prob": report.exceptional_prob,
        "threshold": report.threshold,
        "exponential_regime": report.exponential_regime,
        "verdict": report.verdict,
        "provenance": report.provenance,
    }
    window = ball(ORIGIN, max(config.scales))
    percolation = exceptional_percolation(
        window, params, config.replicas, config.seed, config.coupling, config.threads, check_forcing=True,
    )
    out.rows.extend(percolation.to_rows(config.seed))
    out.checks.append(_violations(
        "closed sites take sign(h + eps eta) in the ground state",
        percolation.forcing_mismatches, config.replicas,
    ))
    out.fits["percolation"] = {
        "predicted_open": percolation.predicted_open,
        "slope": percolation.slope,
        "slope_se": percolation.slope_se,
        "decay_significant": percolation.decay_significant,
    }

    series = m_scan(config.scales, params, config.coupling, config.replicas, config.seed, threads=config.threads)
    out.rows.extend(series.to_rows())
    try:
        fit = decay_fit(series)
        out.fits["decay"] = fit.to_dict()
        name = "m(L) decays exponentially"
        observed = fit.exp_slope + 3.0 * fit.exp_slope_se
        if not report.exponential_regime:
            out.checks.append(inconclusive(name, observed, 0.0, "outside the exponential-decay regime"))
        else:
            out.checks.append(check_upper(name, observed, 0.0, 0.0, f"preferred fit: {fit.preferred}"))
    except DomainError as e:
        out.fits["decay"] = {"skipped": str(e)}

    ell = config.scales[0]
    density = block_density(ell, params, config.coupling, config.replicas, config.seed, threads=config.threads)
    out.add_row(ell, "block_probability", density.block_probability, config.seed)
    out.checks.extend(density.checks)
    out.fits["block_density"] = {
        "union_bound": density.union_bound,
        "boundary_bound": density.boundary_bound,
        "scaled_probability": density.scaled_probability,
    }
    return out


# =============================================================================
# Avalanches
# =============================================================================


def _avalanche_task(
    index: int, radius: int, params: DisorderParams, coupling: CouplingSpec, seed: int, h_grid: Tuple[float, ...],
):
    sample = replica_field(seed, index, radius)
    return avalanche_scan(ball(ORIGIN, radius), sample, coupling, params, h_grid)


def _run_avalanche(config: ExperimentConfig) -> ExperimentOutcome:
    out = ExperimentOutcome()
    params = DisorderParams(0.0, config.epsilon, 0.0)
    for radius in config.scales:
        task = partial(
            _avalanche_task, radius=radius, params=params, coupling=config.coupling,
            seed=config.seed, h_grid=tuple(config.h_grid),
        )
        batch = run_replicas(task, config.replicas, config.threads)
        out.failed.extend(_failures(batch, f"avalanche(L={radius})"))
        summary = avalanche_summary(batch.values)
        n = summary.scans
        out.rows.append({
            "scale": radius, "statistic": "mean_origin_cluster", "mean": summary.mean_origin_cluster,
            "std_err": math.nan, "replicas": n, "seed": config.seed,
        })
        out.rows.extend(
            {"scale": size, "statistic": f"cluster_count(L={radius})", "mean": float(count),
             "std_err": math.nan, "replicas": n, "seed": config.seed}
            for size, count in summary.histogram.items()
        )
        out.checks.append(_violations(f"ground states monotone in h (L={radius})", summary.reversed_flips, n))
        out.fits[f"avalanche(L={radius})"] = {"largest": summary.largest, "histogram": summary.histogram}
    return out


RUNNERS: Dict[ExperimentKind, Callable[[ExperimentConfig], ExperimentOutcome]] = {
    ExperimentKind.M_SCAN: _run_m_scan,
    ExperimentKind.SURFACE_TENSION: _run_surface_tension,
    ExperimentKind.VARIANCE: _run_variance,
    ExperimentKind.COVARIANCE: _run_covariance,
    ExperimentKind.POST: _run_post,
    ExperimentKind.CURDLING: _run_curdling,
    ExperimentKind.MANDELBROT: _run_mandelbrot,
    ExperimentKind.HIGH_DISORDER: _run_high_disorder,
    ExperimentKind.AVALANCHE: _run_avalanche,
}


def run(config: ExperimentConfig, write: bool = True) -> ResultRecord:
    """
    Validate, dispatch and (optionally) persist one experiment.

    Args:
        config: Experiment description.
        write: Write results.csv / summary.json / grid.txt to config.out.

    Returns:
        ResultRecord: Rows, checks and fits of the run.

    Raises:
        ConfigError: The config is invalid (nothing is computed).
    """
    require_valid(config)
    logger.info(f"running {config}")
    start = time.perf_counter()
    outcome = RUNNERS[config.kind](config)
    record = ResultRecord(
        kind=config.kind.value,
        config=config.to_dict(),
        config_hash=config_hash(config),
        rows=outcome.rows,
        checks=outcome.checks,
        fits=outcome.fits,
        failed_replicas=outcome.failed,
        grid=outcome.grid,
        wall_time=time.perf_counter() - start,
        version=__version__,
    )
    if outcome.failed:
        logger.warning(f"{len(outcome.failed)} replica failures recorded in the summary")
    if write and config.out:
        write_record(record, config.out)
    return record
