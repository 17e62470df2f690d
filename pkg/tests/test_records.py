#!/usr/bin/env python3
"""
test_records.py - Tests for result records and output files

Tests for:
- Float formatting and the frozen CSV schema
- Atomic writes of results.csv, summary.json and grid.txt
- Verdict aggregation

Run with:
    pytest tests/test_records.py -v
"""

import json
import math
import os

from rfim_lab.estimators import check_upper, inconclusive
from rfim_lab.records import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    ResultRecord,
    format_float,
    read_rows,
    rows_to_csv,
    write_record,
)


def make_record(**kwargs):
    """A small record with one row per case of interest."""
    values = dict(
        kind="m-scan",
        config={"kind": "m-scan", "seed": 3},
        config_hash="abc123",
        rows=[
            {"scale": 1, "statistic": "m", "mean": 0.1, "std_err": 0.01, "replicas": 10, "seed": 3},
            {"scale": 2, "statistic": "m", "mean": math.nan, "std_err": math.nan, "replicas": 10, "seed": 3},
        ],
        checks=[check_upper("m(2) <= m(1)", 0.05, 0.1)],
        fits={"decay": {"slope": -0.5, "se": math.inf}},
        version="0.1.0",
    )
    values.update(kwargs)
    return ResultRecord(**values)


# =============================================================================
# Formatting
# =============================================================================


class TestFormatting:
    """Tests for format_float and rows_to_csv."""

    def test_format_float(self):
        """Test 17 significant digits and non-finite spellings."""
        assert format_float(0.1) == "0.10000000000000001"
        assert float(format_float(1.0 / 3.0)) == 1.0 / 3.0
        assert format_float(math.nan) == "nan"
        assert format_float(-math.inf) == "-inf"
        assert format_float(2) == "2"

    def test_csv_schema(self):
        """Test the header and one formatted row."""
        text = rows_to_csv(make_record().rows, "abc123")
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "1,m,0.10000000000000001,0.01,10,3,abc123"
        assert lines[2] == "2,m,nan,nan,10,3,abc123"


# =============================================================================
# Files
# =============================================================================


class TestWriteRecord:
    """Tests for write_record."""

    def test_files_written(self, tmp_path):
        """Test that csv and json land in the output directory without temp files."""
        out = tmp_path / "run"
        paths = write_record(make_record(), str(out))
        assert set(paths) == {"csv", "json"}
        assert sorted(os.listdir(out)) == ["results.csv", "summary.json"]

    def test_summary_json(self, tmp_path):
        """Test that non-finite floats become null and verdicts are counted."""
        paths = write_record(make_record(), str(tmp_path))
        with open(paths["json"], "r", encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["schema_version"] == SCHEMA_VERSION
        assert summary["rows"][1]["mean"] is None
        assert summary["fits"]["decay"]["se"] is None
        assert summary["verdicts"] == {"PASS": 1, "FAIL": 0, "INCONCLUSIVE": 0}
        assert summary["checks"][0]["name"] == "m(2) <= m(1)"

    def test_grid_file(self, tmp_path):
        """Test that a grid is written with one trailing newline."""
        paths = write_record(make_record(grid="+-\n-+\n\n"), str(tmp_path))
        with open(paths["grid"], "r", encoding="utf-8") as f:
            assert f.read() == "+-\n-+\n"

    def test_read_rows(self, tmp_path):
        """Test that written means parse back to the same doubles."""
        paths = write_record(make_record(), str(tmp_path))
        rows = read_rows(paths["csv"])
        assert float(rows[0]["mean"]) == 0.1
        assert rows[0]["params_hash"] == "abc123"

    def test_overwrite(self, tmp_path):
        """Test that a second write replaces the first."""
        write_record(make_record(), str(tmp_path))
        record = make_record(rows=[])
        paths = write_record(record, str(tmp_path))
        assert read_rows(paths["csv"]) == []


# =============================================================================
# Verdicts
# =============================================================================


class TestVerdicts:
    """Tests for ResultRecord.passed and verdict_counts."""

    def test_inconclusive_is_not_failure(self):
        """Test that INCONCLUSIVE checks leave the record passing."""
        record = make_record(checks=[inconclusive("x", 1.0, 0.0, "regime")])
        assert record.passed
        assert record.verdict_counts()["INCONCLUSIVE"] == 1

    def test_failure(self):
        """Test that one FAIL fails the record."""
        record = make_record(checks=[check_upper("x", 2.0, 1.0), check_upper("y", 0.0, 1.0)])
        assert not record.passed
        assert record.verdict_counts() == {"PASS": 1, "FAIL": 1, "INCONCLUSIVE": 0}
