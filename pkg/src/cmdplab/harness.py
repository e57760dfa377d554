"""Experiment orchestration: configuration, deterministic runs, sweeps, checks.

A run configuration names the algorithm, the environment (inline spec or a
JSON file), the algorithm parameters, and how many independent repetitions
to perform. Each repetition is fully determined by its seed; repetition k
runs with seed base_seed + k and writes out_dir/seed={seed}.csv plus a JSON
sidecar. Sweeps lay repetitions out under out_dir/M={m}/.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace

from .core import Cmdp
from .envgen import EnvSpec, generate_cmdp
from .npgpd import NpgpdConfig, run_npgpd
from .oracles import SolveReport, constrained_optimum
from .runlog import IterateLog, read_csv, verify_derived_columns
from .zpgpd import ZpgpdConfig, run_zpgpd


class ConfigError(ValueError):
    """A configuration document violated the published schema."""


@dataclass(frozen=True)
class RunConfig:
    algo: str
    env: EnvSpec | str            # inline spec or path to a Cmdp JSON
    algo_config: NpgpdConfig | ZpgpdConfig
    n_seeds: int
    out_dir: str

    def __post_init__(self):
        if self.algo not in ("npgpd", "zpgpd"):
            raise ConfigError(f"algo must be 'npgpd' or 'zpgpd', got {self.algo!r}")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if isinstance(self.env, str) and not os.path.exists(self.env):
            raise ConfigError(f"env file does not exist: {self.env}")


def _check_keys(doc: dict, allowed: set, required: set, path: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"{path}: missing required keys {sorted(missing)}")


def _dataclass_from(doc: dict, cls, path: str, required: set):
    names = {f.name for f in fields(cls)}
    _check_keys(doc, names, required, path)
    try:
        return cls(**doc)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from err


def parse_run_config(doc: dict) -> RunConfig:
    """Strict parse of a run-configuration document; unknown keys rejected."""
    _check_keys(doc, {"algo", "env", "algo_config", "n_seeds", "out_dir"},
                {"algo", "env", "algo_config", "n_seeds", "out_dir"}, "config")
    algo = doc["algo"]
    env_doc = doc["env"]
    if isinstance(env_doc, str):
        env = env_doc
    elif isinstance(env_doc, dict):
        env = _dataclass_from(env_doc, EnvSpec, "config.env", set())
    else:
        raise ConfigError("config.env: must be a path string or an environment spec object")
    ac = doc["algo_config"]
    if not isinstance(ac, dict):
        raise ConfigError("config.algo_config: must be an object")
    if algo == "npgpd":
        algo_config = _dataclass_from(ac, NpgpdConfig, "config.algo_config",
                                      {"iterations", "evaluators", "horizon"})
    else:
        algo_config = _dataclass_from(ac, ZpgpdConfig, "config.algo_config",
                                      {"iterations", "evaluators", "horizon", "eta1", "eta2"})
    return RunConfig(algo=algo, env=env, algo_config=algo_config,
                     n_seeds=doc["n_seeds"], out_dir=doc["out_dir"])


def load_run_config(path: str) -> RunConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    return parse_run_config(doc)


def resolve_env(env: EnvSpec | str) -> Cmdp:
    if isinstance(env, str):
        with open(env) as fh:
            return Cmdp.from_json(fh.read())
    return generate_cmdp(env)


def run_experiment(
    config: RunConfig,
    cmdp: Cmdp | None = None,
    report: SolveReport | None = None,
    quiet: bool = True,
) -> list[str]:
    """Run every repetition and write one CSV + sidecar per seed.

    Returns the CSV paths. The environment and its solve report are shared
    across repetitions; only the algorithm seed varies.
    """
    cmdp = cmdp if cmdp is not None else resolve_env(config.env)
    report = report if report is not None else constrained_optimum(cmdp)
    base_seed = config.algo_config.seed
    paths = []
    for k in range(config.n_seeds):
        seed = base_seed + k
        algo_config = replace(config.algo_config, seed=seed)
        if config.algo == "npgpd":
            log = run_npgpd(cmdp, algo_config, solve_report=report)
        else:
            log = run_zpgpd(cmdp, algo_config, solve_report=report)
        path = os.path.join(config.out_dir, f"seed={seed}.csv")
        log.write(path)
        paths.append(path)
        if not quiet:
            final = log.rows[-1]
            print(f"{config.algo} seed={seed}: gap_avg={final['gap_running_avg']:.6f} "
                  f"violation={final['violation_running']:.6f}")
    return paths


def sweep(
    config: RunConfig,
    m_values: list[int],
    cmdp: Cmdp | None = None,
    report: SolveReport | None = None,
    quiet: bool = True,
) -> dict:
    """Run the experiment per evaluator budget M and write a summary JSON.

    Layout: out_dir/M={m}/seed={k}.csv. The summary holds the final
    running-average gap and violation per (M, seed) plus across-seed means.
    """
    if not m_values:
        raise ConfigError("m_values must be nonempty")
    cmdp = cmdp if cmdp is not None else resolve_env(config.env)
    report = report if report is not None else constrained_optimum(cmdp)
    summary = {"algo": config.algo, "groups": []}
    for m in m_values:
        sub = replace(
            config,
            algo_config=replace(config.algo_config, evaluators=m),
            out_dir=os.path.join(config.out_dir, f"M={m}"),
        )
        paths = run_experiment(sub, cmdp=cmdp, report=report, quiet=quiet)
        runs = []
        for path in paths:
            log = read_csv(path)
            runs.append({
                "seed": log.header["seed"],
                "final_gap_running_avg": log.rows[-1]["gap_running_avg"],
                "final_violation_running": log.rows[-1]["violation_running"],
            })
        summary["groups"].append({
            "M": m,
            "runs": runs,
            "mean_final_gap_running_avg": sum(r["final_gap_running_avg"] for r in runs) / len(runs),
            "mean_final_violation_running": sum(r["final_violation_running"] for r in runs) / len(runs),
        })
    summary_path = os.path.join(config.out_dir, "summary.json")
    os.makedirs(config.out_dir, exist_ok=True)
    with open(summary_path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def check_log(csv_path: str, tol: float = 1e-9) -> list[str]:
    """Recompute the derived columns of a written CSV; empty list means clean."""
    return verify_derived_columns(read_csv(csv_path), tol)


# The reproduction protocol. The paper's figure parameters (T, N, eta) are
# unreported; these step sizes are calibrated defaults that realize the
# documented qualitative findings, not claims about the original values.
PROTOCOL_NPGPD_ETA2 = 0.25
PROTOCOL_ZPGPD = {"eta1": 0.005, "eta2": 0.01, "mu": 0.5}


def protocol_env_spec(seed: int = 7) -> EnvSpec:
    return EnvSpec(seed=seed)


def protocol_npgpd_config(evaluators: int, iterations: int = 300, seed: int = 0) -> NpgpdConfig:
    return NpgpdConfig(
        iterations=iterations,
        evaluators=evaluators,
        horizon=80,
        rounds=4,
        eta2=PROTOCOL_NPGPD_ETA2,
        seed=seed,
    )


def protocol_zpgpd_config(evaluators: int, iterations: int = 3000, seed: int = 0) -> ZpgpdConfig:
    return ZpgpdConfig(
        iterations=iterations,
        evaluators=evaluators,
        horizon=80,
        rounds=4,
        eta1=PROTOCOL_ZPGPD["eta1"],
        eta2=PROTOCOL_ZPGPD["eta2"],
        mu=PROTOCOL_ZPGPD["mu"],
        mu_rule="explicit",
        seed=seed,
    )
