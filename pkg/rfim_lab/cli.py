#!/usr/bin/env python3
"""
cli.py - Command-line entry point

Runs one experiment kind (or the verification suite), prints a summary table
and exits non-zero when any check fails.

Usage:
    # Order parameter m(L) with defaults (config/rfim_config.yml if given)
    python -m rfim_lab mscan --scales 1,2,4,8 --replicas 1000 --out results/mscan

    # Surface tension identities on 4 worker processes
    python -m rfim_lab tension --scales 1,2,3,4 --epsilon 2 --threads 4

    # Positive temperature with the heat-bath engine
    python -m rfim_lab post -T 1.0 --engine mcmc --sweeps 50000

    # Curdling on a 27 x 27 window, grid dump in results/curdle/grid.txt
    python -m rfim_lab curdle --levels 3 --out results/curdle

    # Verification suite
    python -m rfim_lab verify --level quick

Exit status:
    0 every check passed (INCONCLUSIVE does not fail a run)
    1 at least one check failed
    2 invalid configuration
"""

import argparse
import logging
import sys
from typing import List, Optional

from rfim_lab.config import DEFAULTS, ExperimentConfig, ExperimentKind, validate_config
from rfim_lab.errors import ConfigError
from rfim_lab.estimators import Verdict
from rfim_lab.experiments import run
from rfim_lab.records import ResultRecord
from rfim_lab.verify import VerifyReport, verify_suite

logger = logging.getLogger(__name__)

# Subcommand -> experiment kind
COMMANDS = {
    "mscan": ExperimentKind.M_SCAN,
    "tension": ExperimentKind.SURFACE_TENSION,
    "variance": ExperimentKind.VARIANCE,
    "covariance": ExperimentKind.COVARIANCE,
    "post": ExperimentKind.POST,
    "curdle": ExperimentKind.CURDLING,
    "mandelbrot": ExperimentKind.MANDELBROT,
    "highdisorder": ExperimentKind.HIGH_DISORDER,
    "avalanche": ExperimentKind.AVALANCHE,
}

MARKS = {
    Verdict.PASS: "✓ PASS",
    Verdict.FAIL: "✗ FAIL",
    Verdict.INCONCLUSIVE: "⚠ INCONCLUSIVE",
}


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def setup_logging(level: str = "INFO", verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%H:%M:%S",
        force=True,
    )


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Add the flags shared by every experiment subcommand.

    Every flag defaults to None so that the file / environment value wins
    unless the flag is given.
    """
    run_group = parser.add_argument_group("Run Options")
    run_group.add_argument(
        "--config",
        default=None,
        help="YAML experiment file (sections experiment, model, sampling, ...)",
    )
    run_group.add_argument(
        "--seed",
        type=int,
        default=None,
        help=f"Base seed of every replica. Default: RFIM_SEED env or {DEFAULTS['seed']}",
    )
    run_group.add_argument(
        "--replicas",
        type=int,
        default=None,
        help=f"Replicas per scale. Default: RFIM_REPLICAS env or {DEFAULTS['replicas']}",
    )
    run_group.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"Worker processes. Default: RFIM_THREADS env or {DEFAULTS['threads']}",
    )
    run_group.add_argument(
        "--engine",
        choices=["exact", "mcmc"],
        default=None,
        help=f"Gibbs engine at T > 0. Default: RFIM_ENGINE env or '{DEFAULTS['engine']}'",
    )
    run_group.add_argument(
        "--sweeps",
        type=int,
        default=None,
        help=f"Heat-bath sweeps per chain. Default: RFIM_SWEEPS env or {DEFAULTS['sweeps']}",
    )
    run_group.add_argument(
        "--out",
        default=None,
        help=f"Output directory. Default: RFIM_OUT env or '{DEFAULTS['out']}'",
    )

    model_group = parser.add_argument_group("Model Options")
    model_group.add_argument(
        "--J",
        type=float,
        default=None,
        help=f"Coupling strength. Default: RFIM_J env or {DEFAULTS['J']}",
    )
    model_group.add_argument(
        "--h",
        type=float,
        default=None,
        help=f"Uniform field. Default: RFIM_H env or {DEFAULTS['h']}",
    )
    model_group.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help=f"Disorder strength. Default: RFIM_EPSILON env or {DEFAULTS['epsilon']}",
    )
    model_group.add_argument(
        "-T", "--temperature",
        type=float,
        default=None,
        help=f"Temperature, 0 for ground states. Default: RFIM_TEMPERATURE env or {DEFAULTS['temperature']}",
    )
    model_group.add_argument(
        "--range",
        dest="coupling_range",
        type=int,
        default=None,
        help=f"Coupling range R (1 = nearest neighbour). Default: RFIM_RANGE env or {DEFAULTS['coupling_range']}",
    )

    scale_group = parser.add_argument_group("Scale Options")
    scale_group.add_argument(
        "--scales",
        type=_int_list,
        default=None,
        help=f"Comma-separated scales. Default: RFIM_SCALES env or {DEFAULTS['scales']}",
    )
    scale_group.add_argument(
        "--levels",
        type=int,
        default=None,
        help=f"Curdling / Mandelbrot levels. Default: RFIM_LEVELS env or {DEFAULTS['levels']}",
    )
    scale_group.add_argument(
        "--p-grid",
        dest="p_grid",
        type=_float_list,
        default=None,
        help=f"Mandelbrot removal probabilities. Default: RFIM_P_GRID env or {DEFAULTS['p_grid']}",
    )
    scale_group.add_argument(
        "--distance",
        type=int,
        default=None,
        help=f"Covariance separation |u - v|. Default: RFIM_DISTANCE env or {DEFAULTS['distance']}",
    )
    scale_group.add_argument(
        "--alpha",
        type=float,
        default=None,
        help="Exponent of the conditional variance bound (variance only). Default: RFIM_ALPHA env or none",
    )
    scale_group.add_argument(
        "--h-grid",
        dest="h_grid",
        type=_float_list,
        default=None,
        help=f"Avalanche field grid. Default: RFIM_H_GRID env or {DEFAULTS['h_grid']}",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfim_lab",
        description="Random-field Ising model laboratory",
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Verbose (DEBUG) output",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, kind in COMMANDS.items():
        sub = commands.add_parser(name, help=f"Run the {kind.value} experiment")
        add_run_arguments(sub)
    verify = commands.add_parser("verify", help="Run the verification suite")
    verify.add_argument(
        "--level",
        choices=["quick", "full"],
        default="quick",
        help="Suite size (default: quick)",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Layer the parsed flags over file, environment and defaults."""
    overrides = {
        name: getattr(args, name)
        for name in (
            "sweeps", "J", "h", "epsilon", "temperature", "coupling_range",
            "levels", "p_grid", "distance", "alpha", "h_grid",
        )
    }
    return ExperimentConfig.from_args(
        config_path=args.config,
        kind=COMMANDS[args.command].value,
        seed=args.seed,
        replicas=args.replicas,
        threads=args.threads,
        engine=args.engine,
        out=args.out,
        scales=args.scales,
        **overrides,
    )


def print_record(record: ResultRecord) -> None:
    """Print the check table of one experiment record."""
    print("\n" + "=" * 60)
    print(f"EXPERIMENT SUMMARY: {record.kind}")
    print("=" * 60)
    print(f"  Config hash: {record.config_hash[:16]}")
    print(f"  Rows: {len(record.rows)}")
    print(f"  Wall time: {record.wall_time:.1f} s")
    if record.failed_replicas:
        print(f"  ⚠ Failed replicas: {len(record.failed_replicas)}")
    print("-" * 60)
    for check in record.checks:
        print(f"  {MARKS[check.verdict]}: {check.name}")
        print(f"         observed={check.observed:.6g} bound={check.bound:.6g} margin={check.margin:.3g}")
        if check.note:
            print(f"         {check.note}")
    print("=" * 60)
    if record.passed:
        print("\n✓ No check FAILED")
    else:
        print("\n✗ Some checks FAILED")


def print_verify(report: VerifyReport) -> None:
    """Print the verification table."""
    print("\n" + "=" * 60)
    print(f"VERIFICATION SUMMARY ({report.level})")
    print("=" * 60)
    anchor = None
    for row in report.rows:
        if row.anchor != anchor:
            anchor = row.anchor
            print(f"\n  [{anchor}]")
        print(f"  {MARKS[row.verdict]}: {row.claim}")
        if row.detail:
            print(f"         {row.detail}")
    print("=" * 60)
    counts = report.counts()
    print(f"  PASS: {counts['PASS']}  FAIL: {counts['FAIL']}  INCONCLUSIVE: {counts['INCONCLUSIVE']}")
    if report.passed:
        print("\n✓ All claims PASSED")
    else:
        print("\n✗ Some claims FAILED")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the exit status."""
    args = build_parser().parse_args(argv)

    if args.command == "verify":
        setup_logging(verbose=args.verbose)
        report = verify_suite(args.level)
        print_verify(report)
        return 0 if report.passed else 1

    try:
        config = config_from_args(args)
    except ConfigError as e:
        setup_logging(verbose=args.verbose)
        print(f"✗ {e}")
        return 2
    setup_logging(config.log_level, args.verbose)

    result = validate_config(config)
    for warning in result["warnings"]:
        print(f"⚠ {warning}")
    if not result["valid"]:
        for error in result["errors"]:
            print(f"✗ {error}")
        return 2

    record = run(config)
    print_record(record)
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
