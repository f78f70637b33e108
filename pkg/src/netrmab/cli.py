"""Command-line experiment runner.

Subcommands map to the shipped experiments; each accepts --config (JSON, see
ExperimentConfig) and --out. Exit codes: 0 success, 1 config error,
2 feasibility-oracle violation, 3 resource guard.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import _backend, __version__
from .experiments import ExperimentConfig, default_config, run_experiment
from .policies import POLICY_NAMES, ResourceError
from .sim import FeasibilityError

SUBCOMMAND_KINDS = {
    "optimal": "optimal_comparison",
    "policy-table": "policy_table",
    "sweep-budget": "sensitivity_budget",
    "sweep-psi": "sensitivity_psi",
    "sweep-topology": "sensitivity_topology",
    "edge-density": "edge_density",
}

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FEASIBILITY = 2
EXIT_RESOURCE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netrmab",
        description="networked restless bandit experiment runner",
    )
    parser.add_argument("--version", action="version", version=f"netrmab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_KINDS:
        p = sub.add_parser(name, help=f"run the {SUBCOMMAND_KINDS[name]} experiment")
        p.add_argument("--config", type=Path, default=None, help="JSON config file (defaults used otherwise)")
        p.add_argument("--out", type=Path, default=None, help="output directory (default results/<kind>)")
        p.add_argument(
            "--policies",
            default=None,
            help=f"comma-separated subset of {','.join(POLICY_NAMES)} to run",
        )
        p.add_argument("--seeds", type=int, default=None, help="use seeds 0..k-1 instead of the default list")
    v = sub.add_parser("validate", help="validate a config file without running it")
    v.add_argument("--config", type=Path, required=True)
    return parser


def load_config(args, kind: str) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config.read_text())
        if cfg.kind != kind:
            raise ValueError(f"config kind {cfg.kind!r} does not match subcommand ({kind!r})")
    else:
        cfg = default_config(kind)
    from dataclasses import replace

    if args.policies is not None:
        cfg = replace(cfg, policies=tuple(args.policies.split(",")))
    if args.seeds is not None:
        cfg = replace(cfg, seeds=tuple(range(args.seeds)))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        try:
            cfg = ExperimentConfig.from_json(args.config.read_text())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"ok: {cfg.kind} (hash {cfg.config_hash()})")
        return EXIT_OK
    kind = SUBCOMMAND_KINDS[args.command]
    try:
        cfg = load_config(args, kind)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out if args.out is not None else Path("results") / cfg.kind
    print(f"running {cfg.kind} (hash {cfg.config_hash()}, backend {_backend.backend_name()})")
    try:
        cells = run_experiment(cfg, out_dir)
    except FeasibilityError as exc:
        print(f"feasibility violation: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except ResourceError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    print(f"wrote {len(cells)} result rows to {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
