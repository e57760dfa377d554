import json
import os

import numpy as np
import pytest

COLUMNS = (
    "iter", "v_r_exact", "v_g_exact", "lambda", "gap_instant",
    "gap_running_avg", "violation_running", "cum_queries", "cum_env_steps", "wall_ms",
)


def write_run(directory, algo, m, seed, t=20, rng=None):
    """Synthesize one run in the published wire format; returns the CSV path."""
    rng = rng or np.random.default_rng(1000 * m + seed)
    os.makedirs(directory, exist_ok=True)
    rows = []
    gap_sum = 0.0
    vg_sum = 0.0
    for i in range(t):
        gap = float(np.exp(-i / 6.0) * (1.0 + 0.1 * rng.standard_normal()) / np.sqrt(m) + 0.01)
        v_r = 0.8 - gap
        v_g = 0.5 + 0.002 * i + 0.01 * rng.standard_normal()
        gap_sum += gap
        vg_sum += v_g
        rows.append([
            i, v_r, v_g, 0.3, gap, gap_sum / (i + 1),
            max(0.0, 0.55 - vg_sum / (i + 1)), (i + 1) * 100, (i + 1) * 500,
            float(i) * 3.5,
        ])
    csv_path = os.path.join(directory, f"seed={seed}.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(
                str(int(v)) if j in (0, 7, 8) else format(float(v), ".17g")
                for j, v in enumerate(row)) + "\n")
    header = {"algo": algo, "seed": seed, "M": m, "N": 4, "H": 80, "T": t,
              "eta1": 2.77, "eta2": 0.25, "b": 0.55,
              "v_star_constrained": 0.79, "v_star_unconstrained": 0.84,
              "slater_slack": 0.33}
    with open(csv_path.replace(".csv", ".json"), "w", newline="\n") as fh:
        json.dump(header, fh, sort_keys=True)
    return csv_path


@pytest.fixture
def sweep_tree(tmp_path):
    """root/{npgpd,zpgpd}/M={16,64,256}/seed={0,1,2}.csv"""
    root = tmp_path / "out"
    for algo in ("npgpd", "zpgpd"):
        for m in (16, 64, 256):
            for seed in range(3):
                write_run(str(root / algo / f"M={m}"), algo, m, seed)
    return str(root)
