"""Per-iteration run records and their CSV/JSON wire formats.

One CSV per (algorithm, seed): fixed column order, 17-significant-digit
decimals, LF endings. Header metadata travels in a JSON sidecar so the CSV
stays a plain table. wall_ms is diagnostic and excluded from determinism
guarantees; everything else is reproducible byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

COLUMNS = (
    "iter",
    "v_r_exact",
    "v_g_exact",
    "lambda",
    "gap_instant",
    "gap_running_avg",
    "violation_running",
    "cum_queries",
    "cum_env_steps",
    "wall_ms",
)

_INT_COLUMNS = {"iter", "cum_queries", "cum_env_steps"}


def _fmt(col: str, value) -> str:
    if col in _INT_COLUMNS:
        return str(int(value))
    return format(float(value), ".17g")


@dataclass
class IterateLog:
    """Header metadata plus one row per policy-gradient iteration."""

    header: dict
    rows: list = field(default_factory=list)

    def append(self, **kwargs):
        missing = set(COLUMNS) - set(kwargs)
        if missing:
            raise ValueError(f"row missing columns: {sorted(missing)}")
        self.rows.append({c: kwargs[c] for c in COLUMNS})

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def to_csv_text(self) -> str:
        lines = [",".join(COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_fmt(c, row[c]) for c in COLUMNS))
        return "\n".join(lines) + "\n"

    def write(self, csv_path: str):
        """Write CSV plus JSON sidecar atomically (temp file + rename)."""
        _atomic_write(csv_path, self.to_csv_text())
        sidecar = os.path.splitext(csv_path)[0] + ".json"
        _atomic_write(sidecar, json.dumps(self.header, sort_keys=True, separators=(",", ":")) + "\n")


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(csv_path: str) -> IterateLog:
    """Load a CSV and its sidecar back into an IterateLog."""
    with open(csv_path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != COLUMNS:
        raise ValueError(f"{csv_path}: unexpected CSV schema")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = {}
        for col, part in zip(COLUMNS, parts):
            row[col] = int(part) if col in _INT_COLUMNS else float(part)
        rows.append(row)
    sidecar = os.path.splitext(csv_path)[0] + ".json"
    with open(sidecar, "r") as fh:
        header = json.load(fh)
    return IterateLog(header=header, rows=rows)


def verify_derived_columns(log: IterateLog, tol: float = 1e-9) -> list[str]:
    """Recompute gap/violation columns from the raw values; report mismatches."""
    problems = []
    v_star = log.header["v_star_constrained"]
    b = log.header["b"]
    sum_gap = 0.0
    sum_vg = 0.0
    for i, row in enumerate(log.rows):
        if row["iter"] != i:
            problems.append(f"row {i}: iter={row['iter']} not consecutive")
        gap = v_star - row["v_r_exact"]
        sum_gap += gap
        sum_vg += row["v_g_exact"]
        n = i + 1
        checks = (
            ("gap_instant", gap),
            ("gap_running_avg", sum_gap / n),
            ("violation_running", max(0.0, b - sum_vg / n)),
        )
        for col, expect in checks:
            if abs(row[col] - expect) > tol:
                problems.append(f"row {i}: {col}={row[col]!r}, recomputed {expect!r}")
        if i > 0 and row["cum_queries"] < log.rows[i - 1]["cum_queries"]:
            problems.append(f"row {i}: cum_queries decreased")
    return problems
