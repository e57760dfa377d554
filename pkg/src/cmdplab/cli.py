"""Command-line surface: gen-env, solve, run, sweep, check-log."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .core import Cmdp
from .envgen import EnvSpec, generate_cmdp
from .harness import ConfigError, _dataclass_from, load_run_config, run_experiment, sweep, check_log
from .oracles import constrained_optimum


def _write(path: str, text: str, quiet: bool, what: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")
    if not quiet:
        print(f"wrote {what} to {path}")


def _load_env_spec(path: str | None, seed_override: int | None) -> EnvSpec:
    doc = {}
    if path is not None:
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("spec: top level must be an object")
    spec = _dataclass_from(doc, EnvSpec, "spec", set())
    if seed_override is not None:
        spec = dataclasses.replace(spec, seed=seed_override)
    return spec


def _cmd_gen_env(args) -> int:
    spec = _load_env_spec(args.spec, args.seed)
    cmdp = generate_cmdp(spec)
    _write(args.out, cmdp.to_json(), args.quiet, "environment")
    return 0


def _cmd_solve(args) -> int:
    with open(args.env) as fh:
        cmdp = Cmdp.from_json(fh.read())
    report = constrained_optimum(cmdp)
    _write(args.out, report.to_json(), args.quiet, "solve report")
    if not args.quiet:
        print(f"v*_constrained={report.v_star_constrained:.6f} "
              f"v*_unconstrained={report.v_star_unconstrained:.6f} "
              f"lambda*={report.lambda_star:.6f} slack={report.slater_slack:.6f}")
    return 0


def _apply_overrides(config, args):
    if args.out_dir is not None:
        config = dataclasses.replace(config, out_dir=args.out_dir)
    if args.seed is not None:
        config = dataclasses.replace(
            config, algo_config=dataclasses.replace(config.algo_config, seed=args.seed))
    return config


def _cmd_run(args) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    paths = run_experiment(config, quiet=args.quiet)
    if not args.quiet:
        print(f"{len(paths)} run(s) written under {config.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    m_values = [int(tok) for tok in args.m.split(",") if tok]
    if not m_values:
        raise ConfigError("--m must list at least one evaluator count")
    summary = sweep(config, m_values, quiet=args.quiet)
    if not args.quiet:
        for group in summary["groups"]:
            print(f"M={group['M']}: mean final gap {group['mean_final_gap_running_avg']:.6f}, "
                  f"mean final violation {group['mean_final_violation_running']:.6f}")
    return 0


def _cmd_check_log(args) -> int:
    problems = check_log(args.csv)
    if problems:
        for line in problems:
            print(line, file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"{args.csv}: derived columns verified")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmdplab",
        description="Constrained-MDP lab: primal-dual policy gradients from simulated feedback",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--out-dir", default=None, help="override the configured output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate a protocol environment as JSON")
    p.add_argument("--spec", default=None, help="environment spec JSON (defaults otherwise)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_env)

    p = sub.add_parser("solve", help="compute exact baselines for an environment")
    p.add_argument("--env", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("run", help="run one algorithm configuration, all seeds")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run the configuration once per evaluator budget")
    p.add_argument("--config", required=True)
    p.add_argument("--m", required=True, help="comma-separated evaluator counts, e.g. 16,64,256")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("check-log", help="recompute and verify a CSV's derived columns")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_check_log)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
