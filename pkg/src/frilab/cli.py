"""Command line front end for the experiment registry.

Exit codes: 0 success, 2 invalid configuration or input, 3 runtime guard
tripped (horizon cap, enumeration guard, bracket failure, inconsistent
trace).  ``FRILAB_THREADS`` sets the shard thread count and
``FRILAB_BACKEND`` selects the kernel backend; both are read from the
environment, not from flags.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .experiments import ConfigError, ExperimentConfig
from .exploration import replay_trace
from .killed_walk import HorizonError
from .renorm import RenormError

_GUARDS = (
    HorizonError, RenormError, RuntimeError, ValueError, AssertionError,
    OverflowError, MemoryError, OSError,
)

_CONFIG_FLAGS = (
    # (flag, config field, parse key)
    ("--experiment", "experiment", None),
    ("--d", "d", "d"),
    ("--u", "u", "u"),
    ("--u-grid", "u_grid", "u_grid"),
    ("--T", "T", "T"),
    ("--T-grid", "T_grid", "T_grid"),
    ("--R", "R", "R"),
    ("--L", "L", "L"),
    ("--eps", "eps", "eps"),
    ("--t", "t", "t"),
    ("--trials", "trials", "trials"),
    ("--seed", "seed", "seed"),
    ("--shards", "shards", "shards"),
    ("--intrusion-tol", "intrusion_tol", "intrusion_tol"),
    ("--output", "output", None),
    ("--dump-traces", "dump_traces", None),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-c", "--config", metavar="FILE",
        help="INI config file; flags override its values",
    )
    for flag, dest, _ in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, default=None, metavar="V")


def _assemble(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = experiments.config_from_file(args.config, cfg)
    overrides = {}
    for _, dest, key in _CONFIG_FLAGS:
        raw = getattr(args, dest)
        if raw is None:
            continue
        overrides[dest] = (
            raw if key is None else experiments._parse_value(key, raw)
        )
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def _print_diagnostics(diag: dict) -> None:
    for msg in diag["warnings"]:
        print(f"warning: {msg}", file=sys.stderr)
    for msg in diag["errors"]:
        print(f"error: {msg}", file=sys.stderr)


def _cmd_run(args) -> int:
    cfg = _assemble(args)
    diag = experiments.validate(cfg)
    _print_diagnostics(diag)
    if diag["errors"]:
        return 2
    csv_path, manifest_path, n_rows = experiments.run_to_files(cfg)
    print(f"{cfg.experiment}: {n_rows} rows -> {csv_path}")
    print(f"manifest -> {manifest_path}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _assemble(args)
    diag = experiments.validate(cfg)
    _print_diagnostics(diag)
    if diag["errors"]:
        return 2
    print("ok")
    return 0


def _cmd_defaults(args) -> int:
    cfg = _assemble(args)
    sys.stdout.write(experiments.config_to_ini(cfg))
    return 0


def _cmd_list(_args) -> int:
    for name, summary in experiments.list_experiments():
        print(f"{name:<20} {summary}")
    return 0


def _cmd_replay_trace(args) -> int:
    try:
        with open(args.trace, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    blocks = [
        [ln for ln in block.splitlines() if ln.strip()]
        for block in text.split("\n\n")
    ]
    blocks = [b for b in blocks if b]
    if not blocks:
        print("error: trace file holds no decision blocks", file=sys.stderr)
        return 2
    for i, lines in enumerate(blocks):
        out = replay_trace(lines, d=args.d)
        print(
            f"trace {i}: j={out['j']} outcome={int(out['outcome'])} "
            f"open_edges={len(out['open_edges'])} "
            f"points={len(out['sampled_points'])}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frilab",
        description="Monte Carlo experiments on killed random walk soups.",
        epilog=(
            "environment: FRILAB_THREADS (shard workers), "
            "FRILAB_BACKEND (numba|numpy)"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment to CSV")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_val = sub.add_parser("validate", help="check a config and exit")
    _add_config_flags(p_val)
    p_val.set_defaults(fn=_cmd_validate)

    p_def = sub.add_parser(
        "defaults", help="print the effective config as INI"
    )
    _add_config_flags(p_def)
    p_def.set_defaults(fn=_cmd_defaults)

    p_list = sub.add_parser("list", help="list registered experiments")
    p_list.set_defaults(fn=_cmd_list)

    p_rep = sub.add_parser(
        "replay-trace",
        help="re-run recorded exploration decisions without randomness",
    )
    p_rep.add_argument("trace", help="json-lines trace file")
    p_rep.add_argument("--d", type=int, default=3)
    p_rep.set_defaults(fn=_cmd_replay_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _GUARDS as exc:
        print(f"runtime guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
