"""Command-line front end.

    hetero-rt run --experiment reuse-modes --out results.csv
    hetero-rt trace dump --workload nbody --seed 7 --out nbody.trace
    hetero-rt trace replay --in nbody.trace --out results.csv
    hetero-rt oracle --particles 512 --theta 0.5

Set HETERO_RT_LOG=debug|info|warning to control verbosity.  Exit codes:
0 success, 2 usage error, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import experiments
from .config import load_config
from .errors import ConfigError, HeteroRtError, TraceFormatError
from .workloads import nbody as nb
from .workloads import trace as tr

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SIM = 3

log = logging.getLogger("hetero_rt")


def _setup_logging() -> None:
    level_name = os.environ.get("HETERO_RT_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _base_config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "policy", None):
        cfg.aggregation = args.policy
    if getattr(args, "scheduler", None):
        cfg.scheduler = args.scheduler
    if getattr(args, "mode", None):
        cfg.memory_mode = args.mode
    return cfg.validate()


def _cmd_run(args) -> int:
    cfg = _base_config(args)
    rows = experiments.run_experiment(cfg, args.experiment, log_dir=args.log_dir)
    experiments.write_results(rows, args.out)
    for row in rows:
        print(f"{row.config_id}: makespan={row.makespan:.3f}")
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_trace_dump(args) -> int:
    cfg = _base_config(args)
    if args.workload == "nbody":
        records = tr.nbody_stream(dataclasses.replace(cfg.nbody, seed=cfg.seed))
    elif args.workload == "md":
        records = tr.md_stream(dataclasses.replace(cfg.md, seed=cfg.seed))
    else:
        raise ConfigError(f"cannot dump workload {args.workload!r}")
    tr.dump_trace(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_trace_replay(args) -> int:
    cfg = _base_config(args)
    cfg.workload = "trace"
    cfg.trace_path = args.trace
    cfg.validate()
    rows = experiments.run_experiment(cfg, None, log_dir=args.log_dir)
    if args.out:
        experiments.write_results(rows, args.out)
    for row in rows:
        print(f"{row.config_id}: makespan={row.makespan:.3f}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    """Check tree-walk forces against direct summation."""
    params = nb.NBodyParams(
        particles=args.particles, theta=args.theta, seed=args.seed or 42,
        bucket_size=args.bucket_size, clustering=args.clustering,
    )
    ps = nb.gen_particles(params.particles, params.seed, params.clustering, params.dim)
    tree = nb.build_bucket_tree(ps, params.bucket_size)
    lists = nb.build_interaction_lists(tree, params.theta, ps)
    approx = nb.eval_forces(tree, lists, ps)
    exact = nb.direct_force_oracle(ps)
    scale = np.linalg.norm(exact, axis=1)
    err = np.linalg.norm(approx - exact, axis=1) / np.maximum(scale, 1e-30)
    print(f"particles={args.particles} theta={args.theta}")
    print(f"median relative force error: {np.median(err):.3e}")
    print(f"max relative force error:    {err.max():.3e}")
    limit = args.limit if args.limit is not None else (1e-9 if args.theta == 0 else 0.05)
    if np.median(err) > limit:
        print(f"FAIL: median error above {limit:.3e}")
        return EXIT_SIM
    print(f"OK (limit {limit:.3e})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetero-rt",
        description="Adaptive aggregation / reuse / hybrid-scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None)

    p_run = sub.add_parser("run", help="run an experiment matrix")
    add_common(p_run)
    p_run.add_argument(
        "--experiment", default=None, choices=sorted(experiments.EXPERIMENTS),
        help="experiment id (omit to run the bare config)",
    )
    p_run.add_argument("--out", default="results.csv")
    p_run.add_argument("--policy", default=None, choices=["adaptive", "static_count"],
                       help="aggregation policy override")
    p_run.add_argument("--scheduler", default=None,
                       choices=["gpu_only", "adaptive", "static_count"])
    p_run.add_argument("--mode", default=None,
                       choices=["redundant", "reuse", "reuse_sorted"],
                       help="memory mode override")
    p_run.add_argument("--log-dir", default=None,
                       help="write each run's schedule log into this directory")
    p_run.set_defaults(func=_cmd_run)

    p_trace = sub.add_parser("trace", help="dump or replay work-request traces")
    trace_sub = p_trace.add_subparsers(dest="trace_command", required=True)

    p_dump = trace_sub.add_parser("dump", help="generate a stream and write it")
    add_common(p_dump)
    p_dump.add_argument("--workload", default="nbody", choices=["nbody", "md"])
    p_dump.add_argument("--out", required=True)
    p_dump.set_defaults(func=_cmd_trace_dump)

    p_replay = trace_sub.add_parser("replay", help="simulate a recorded stream")
    add_common(p_replay)
    p_replay.add_argument("--in", dest="trace", required=True)
    p_replay.add_argument("--out", default=None)
    p_replay.add_argument("--policy", default=None, choices=["adaptive", "static_count"])
    p_replay.add_argument("--mode", default=None,
                          choices=["redundant", "reuse", "reuse_sorted"])
    p_replay.add_argument("--log-dir", default=None,
                          help="write each run's schedule log into this directory")
    p_replay.set_defaults(func=_cmd_trace_replay)

    p_oracle = sub.add_parser("oracle", help="N-body force correctness check")
    add_common(p_oracle)
    p_oracle.add_argument("--particles", type=int, default=512)
    p_oracle.add_argument("--theta", type=float, default=0.0)
    p_oracle.add_argument("--bucket-size", type=int, default=8)
    p_oracle.add_argument("--clustering", type=float, default=0.6)
    p_oracle.add_argument("--limit", type=float, default=None,
                          help="median relative error limit")
    p_oracle.set_defaults(func=_cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HeteroRtError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIM
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
