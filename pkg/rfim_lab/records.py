"""
records.py - Result records and their on-disk form

Output directory layout:
    results.csv    scale,statistic,mean,std_err,replicas,seed,params_hash
    summary.json   schema_version, resolved config, hash, rows, fits, verdicts,
                   wall time, software version, failed replicas
    grid.txt       optional spin / curdling grids

The CSV schema is frozen at SCHEMA_VERSION; floats are written with 17
significant digits so the text round-trips to the same doubles. Every file is
written to a temporary file in the target directory and moved into place.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from rfim_lab.estimators import BoundCheck, Verdict

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("scale", "statistic", "mean", "std_err", "replicas", "seed", "params_hash")


@dataclass
class ResultRecord:
    """
    Everything one run produced.

    Attributes:
        kind: Experiment kind.
        config: Resolved configuration (echoed into the JSON).
        config_hash: Hash of every numerics-affecting config field.
        rows: Per-observable rows (scale, statistic, mean, std_err, replicas, seed).
        checks: Inequality checks with verdicts and margins.
        fits: Named fit or report payloads.
        failed_replicas: Failed replica indices with their error text.
        grid: Optional text grid.
        wall_time: Seconds spent in run().
        version: Software version.
    """
    kind: str
    config: Dict[str, Any]
    config_hash: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    checks: List[BoundCheck] = field(default_factory=list)
    fits: Dict[str, Any] = field(default_factory=dict)
    failed_replicas: List[Any] = field(default_factory=list)
    grid: Optional[str] = None
    wall_time: float = 0.0
    version: str = ""

    @property
    def passed(self) -> bool:
        """No check failed (INCONCLUSIVE does not count as a failure)."""
        return all(c.verdict != Verdict.FAIL for c in self.checks)

    def verdict_counts(self) -> Dict[str, int]:
        counts = {v.value: 0 for v in Verdict}
        for c in self.checks:
            counts[c.verdict.value] += 1
        return counts

    def to_summary(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "version": self.version,
            "config": self.config,
            "config_hash": self.config_hash,
            "wall_time_s": self.wall_time,
            "rows": [_json_safe(r) for r in self.rows],
            "fits": _json_safe(self.fits),
            "checks": [_json_safe(c.to_dict()) for c in self.checks],
            "verdicts": self.verdict_counts(),
            "failed_replicas": _json_safe(self.failed_replicas),
        }


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats by None and numpy scalars by Python numbers."""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def format_float(value: float) -> str:
    """17 significant digits; nan and inf spelled as such."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def rows_to_csv(rows: Sequence[Dict[str, Any]], params_hash: str) -> str:
    """Render rows in the frozen CSV schema."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([
            row["scale"],
            row["statistic"],
            format_float(row["mean"]),
            format_float(row["std_err"]),
            int(row["replicas"]),
            int(row["seed"]),
            params_hash,
        ])
    return buffer.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write text to path via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_record(record: ResultRecord, out_dir: str) -> Dict[str, str]:
    """
    Persist a record.

    Returns:
        dict: file kind -> path written.
    """
    paths = {
        "csv": os.path.join(out_dir, "results.csv"),
        "json": os.path.join(out_dir, "summary.json"),
    }
    write_atomic(paths["csv"], rows_to_csv(record.rows, record.config_hash))
    write_atomic(paths["json"], json.dumps(record.to_summary(), indent=2, sort_keys=True) + "\n")
    if record.grid is not None:
        paths["grid"] = os.path.join(out_dir, "grid.txt")
        write_atomic(paths["grid"], record.grid.rstrip("\n") + "\n")
    logger.info(f"wrote {', '.join(sorted(paths.values()))}")
    return paths


def read_rows(path: str) -> List[Dict[str, str]]:
    """Read results.csv back as a list of string dicts."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
