#!/usr/bin/env python3
"""
test_cli.py - Tests for the command-line entry point

Tests for:
- Argument parsing and layering into ExperimentConfig
- Exit status 0 / 2 and printed summaries

Run with:
    pytest tests/test_cli.py -v
"""

import os

import pytest

from rfim_lab.cli import build_parser, config_from_args, main
from rfim_lab.config import DEFAULTS, ExperimentKind
from rfim_lab.gibbs import Engine


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Remove RFIM_* variables so tests see the defaults."""
    for name in list(os.environ):
        if name.startswith("RFIM_"):
            monkeypatch.delenv(name, raising=False)


# =============================================================================
# Parsing
# =============================================================================


class TestParsing:
    """Tests for build_parser and config_from_args."""

    def test_run_flags(self):
        """Test list flags, model flags and the subcommand kind."""
        args = build_parser().parse_args([
            "post", "--scales", "1,2", "-T", "0.5", "--range", "2", "--engine", "mcmc",
            "--replicas", "3", "--threads", "2",
        ])
        config = config_from_args(args)
        assert config.kind == ExperimentKind.POST
        assert config.scales == [1, 2]
        assert config.temperature == 0.5
        assert config.coupling_range == 2
        assert config.engine == Engine.MCMC
        assert config.threads == 2

    def test_float_grid(self):
        """Test --p-grid parsing."""
        args = build_parser().parse_args(["mandelbrot", "--p-grid", "0.1,0.2"])
        assert config_from_args(args).p_grid == [0.1, 0.2]

    def test_unset_flags_keep_defaults(self):
        """Test that omitted flags leave defaults in place."""
        config = config_from_args(build_parser().parse_args(["mscan"]))
        assert config.replicas == DEFAULTS["replicas"]

    def test_unknown_command(self):
        """Test that argparse rejects unknown subcommands."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["bogus"])


# =============================================================================
# main()
# =============================================================================


class TestMain:
    """Tests for exit status and printed output."""

    def test_invalid_config(self, capsys):
        """Test exit status 2 on a config that fails validation."""
        assert main(["mscan", "--replicas", "0"]) == 2
        assert "✗" in capsys.readouterr().out

    def test_missing_config_file(self, tmp_path):
        """Test exit status 2 when the config file cannot be read."""
        assert main(["tension", "--config", str(tmp_path / "absent.yml")]) == 2

    def test_successful_run(self, tmp_path, capsys):
        """Test a small m-scan end to end."""
        status = main(["mscan", "--scales", "1,2", "--replicas", "3", "--out", str(tmp_path)])
        output = capsys.readouterr().out
        assert status == 0
        assert "EXPERIMENT SUMMARY: m-scan" in output
        assert "⚠" in output
        assert os.path.exists(tmp_path / "results.csv")
