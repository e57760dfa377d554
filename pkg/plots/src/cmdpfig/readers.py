"""Readers for the published run-log wire format.

A run is one CSV (fixed column set, one row per iteration) plus a JSON
sidecar of header metadata. This package shares no code with the producer;
the schema below is the contract.
"""

from __future__ import annotations

import glob as globlib
import json
import os
from dataclasses import dataclass

import numpy as np

CSV_COLUMNS = (
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

METRICS = ("gap_running_avg", "violation_running")


class SchemaError(ValueError):
    """A CSV or sidecar does not match the published schema."""


@dataclass(frozen=True)
class RunLog:
    path: str
    header: dict
    columns: dict  # column name -> float ndarray

    @property
    def algo(self) -> str:
        return self.header["algo"]

    @property
    def m(self) -> int:
        return int(self.header["M"])

    @property
    def seed(self) -> int:
        return int(self.header["seed"])


def load_run(csv_path: str) -> RunLog:
    with open(csv_path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(f"{csv_path}: empty file")
    names = tuple(lines[0].split(","))
    if names != CSV_COLUMNS:
        raise SchemaError(f"{csv_path}: unexpected columns {names}")
    data = np.array([[float(tok) for tok in line.split(",")] for line in lines[1:]])
    if data.size == 0:
        raise SchemaError(f"{csv_path}: no data rows")
    if data.shape[1] != len(CSV_COLUMNS):
        raise SchemaError(f"{csv_path}: ragged rows")
    sidecar = os.path.splitext(csv_path)[0] + ".json"
    if not os.path.exists(sidecar):
        raise SchemaError(f"{csv_path}: missing sidecar {sidecar}")
    with open(sidecar) as fh:
        header = json.load(fh)
    for key in ("algo", "seed", "M", "T"):
        if key not in header:
            raise SchemaError(f"{sidecar}: missing header key {key!r}")
    columns = {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}
    return RunLog(path=csv_path, header=header, columns=columns)


def load_glob(pattern: str) -> list[RunLog]:
    paths = sorted(globlib.glob(pattern, recursive=True))
    if not paths:
        raise SchemaError(f"no CSV matches {pattern!r}")
    runs = [load_run(p) for p in paths]
    algos = {r.algo for r in runs}
    lengths = {len(r.columns["iter"]) for r in runs}
    if len(algos) > 1:
        raise SchemaError(f"matched CSVs mix algorithms {sorted(algos)}")
    if len(lengths) > 1:
        raise SchemaError(f"matched CSVs mix iteration counts {sorted(lengths)}")
    return runs
