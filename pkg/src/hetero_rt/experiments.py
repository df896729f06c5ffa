"""Experiment matrices and the CSV results sink.

Each experiment id bundles the policy variants of one comparison:

  combine-vs-static   adaptive aggregation vs flush-every-100 (nbody)
  reuse-modes         redundant vs reuse vs reuse+sorted placement (nbody)
  policy-matrix       aggregation x memory-mode cross product (nbody)
  md-scheduling       adaptive vs count-based queue split (md)

Rows append to the CSV with a run id, so sweeps accumulate in one file.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig
from .errors import ConfigError
from .timeline import ScheduleLog, Timeline
from .workloads.md import MDWorkload
from .workloads.nbody import NBodyWorkload
from .workloads.trace import TraceWorkload, parse_trace

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "run_id",
    "config_id",
    "makespan",
    "total_transfer_bytes",
    "total_transfer_time",
    "total_kernel_time",
    "total_cpu_time",
    "combined_batch_count",
    "mean_batch_size",
    "transactions_total",
]


@dataclass
class ResultRow:
    config_id: str
    makespan: float
    total_transfer_bytes: int
    total_transfer_time: float
    total_kernel_time: float
    total_cpu_time: float
    combined_batch_count: int
    mean_batch_size: float
    transactions_total: int

    def as_csv_fields(self) -> list[str]:
        return [
            self.config_id,
            f"{self.makespan:.9f}",
            str(self.total_transfer_bytes),
            f"{self.total_transfer_time:.9f}",
            f"{self.total_kernel_time:.9f}",
            f"{self.total_cpu_time:.9f}",
            str(self.combined_batch_count),
            f"{self.mean_batch_size:.6f}",
            str(self.transactions_total),
        ]


def summarize(config_id: str, slog: ScheduleLog) -> ResultRow:
    transfers = slog.select("transfer")
    kernels = slog.select("kernel")
    cpus = slog.select("cpu")
    combines = [r for r in slog.select("combine") if r.device == "GPU"]
    batch_sizes = [r.items for r in combines]
    return ResultRow(
        config_id=config_id,
        makespan=slog.makespan,
        total_transfer_bytes=sum(r.bytes for r in transfers),
        total_transfer_time=sum(r.duration for r in transfers),
        total_kernel_time=sum(r.duration for r in kernels),
        total_cpu_time=sum(r.duration for r in cpus),
        combined_batch_count=len(combines),
        mean_batch_size=(sum(batch_sizes) / len(batch_sizes)) if batch_sizes else 0.0,
        transactions_total=sum(r.transactions for r in kernels),
    )


def build_workload(cfg: ExperimentConfig):
    if cfg.workload == "nbody":
        return NBodyWorkload(dataclasses.replace(cfg.nbody, seed=cfg.seed))
    if cfg.workload == "md":
        return MDWorkload(dataclasses.replace(cfg.md, seed=cfg.seed))
    if cfg.workload == "trace":
        return TraceWorkload(parse_trace(cfg.trace_path))
    raise ConfigError(f"unknown workload {cfg.workload!r}")


def run_single(cfg: ExperimentConfig) -> tuple[ScheduleLog, ResultRow]:
    """One deterministic simulator run for one concrete configuration."""
    cfg.validate()
    workload = build_workload(cfg)
    classes = workload.kernel_classes()
    cost = dataclasses.replace(cfg.cost, noise_seed=cfg.seed)
    tl = Timeline(cfg.device(), cfg.kernel_specs(classes), cost, cfg.policy_params())
    workload.setup(tl)
    slog = tl.run()
    row = summarize(cfg.config_id(), slog)
    log.info("run %s: makespan %.3f", cfg.config_id(), row.makespan)
    return slog, row


EXPERIMENTS = {
    "combine-vs-static": [
        {"workload": "nbody", "aggregation": "adaptive"},
        {"workload": "nbody", "aggregation": "static_count"},
    ],
    "reuse-modes": [
        {"workload": "nbody", "memory_mode": "redundant"},
        {"workload": "nbody", "memory_mode": "reuse"},
        {"workload": "nbody", "memory_mode": "reuse_sorted"},
    ],
    "policy-matrix": [
        {"workload": "nbody", "aggregation": a, "memory_mode": m}
        for a in ("adaptive", "static_count")
        for m in ("redundant", "reuse", "reuse_sorted")
    ],
    "md-scheduling": [
        {"workload": "md", "scheduler": "adaptive"},
        {"workload": "md", "scheduler": "static_count"},
    ],
}


def run_experiment(
    cfg: ExperimentConfig,
    experiment: str | None = None,
    log_dir: str | Path | None = None,
) -> list[ResultRow]:
    """All variant x repetition rows for an experiment id (or the bare config).

    With `log_dir`, each run's serialized schedule log is written there as
    `<config_id>-r<repetition>.log`.
    """
    if experiment is None:
        variants = [{}]
    elif experiment in EXPERIMENTS:
        variants = EXPERIMENTS[experiment]
    else:
        raise ConfigError(
            f"unknown experiment {experiment!r}, expected one of {sorted(EXPERIMENTS)}"
        )
    rows = []
    for variant in variants:
        vcfg = dataclasses.replace(cfg, **variant).validate()
        for rep in range(cfg.repetitions):
            slog, row = run_single(vcfg)
            rows.append(row)
            if log_dir is not None:
                out = Path(log_dir)
                out.mkdir(parents=True, exist_ok=True)
                (out / f"{row.config_id}-r{rep}.log").write_text(slog.serialize())
    return rows


def write_results(rows: list[ResultRow], path: str | Path) -> None:
    """Append rows (with a fresh run id) to the CSV, creating it with a header."""
    path = Path(path)
    next_run = 0
    exists = path.exists() and path.stat().st_size > 0
    if exists:
        with path.open() as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            for record in reader:
                if record:
                    next_run = max(next_run, int(record[0]) + 1)
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([str(next_run)] + row.as_csv_fields())
