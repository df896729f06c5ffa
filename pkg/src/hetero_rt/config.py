"""Experiment configuration: plain-text key=value sections (INI dialect).

Every knob the simulator understands lives here with its shipped default;
``configs/default.ini`` in the repository documents the same values.  A
config file only needs the keys it wants to change.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .devicesim import CostParams, DEVICE_PRESETS, KERNEL_PRESETS, DeviceSpec, KernelSpec
from .errors import ConfigError
from .memory import MemoryMode
from .timeline import PolicyParams
from .workloads.md import MDParams
from .workloads.nbody import NBodyParams

AGGREGATION_POLICIES = ("adaptive", "static_count")
SCHEDULER_POLICIES = ("gpu_only", "adaptive", "static_count")
WORKLOADS = ("nbody", "md", "trace")


@dataclass
class ExperimentConfig:
    workload: str = "nbody"
    trace_path: str = ""
    seed: int = 42
    repetitions: int = 1
    device_preset: str = "kepler-k20"
    aggregation: str = "adaptive"
    static_count: int = 100
    tick: float = 1.0
    timeout_factor: float = 2.0
    window: int = 0
    memory_mode: str = "reuse_sorted"
    memory_capacity: int = 8 << 20
    slot_bytes: int = 256
    scheduler: str = "gpu_only"
    static_cpu_fraction: float = 0.5
    scheduler_decay: float = 0.0
    nearest_target: bool = False
    cost: CostParams = field(default_factory=CostParams)
    nbody: NBodyParams = field(default_factory=NBodyParams)
    md: MDParams = field(default_factory=MDParams)
    max_size_override: dict[str, int] = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.workload not in WORKLOADS:
            raise ConfigError(f"unknown workload {self.workload!r}, expected {WORKLOADS}")
        if self.aggregation not in AGGREGATION_POLICIES:
            raise ConfigError(
                f"unknown aggregation policy {self.aggregation!r}, expected {AGGREGATION_POLICIES}"
            )
        if self.scheduler not in SCHEDULER_POLICIES:
            raise ConfigError(
                f"unknown scheduler policy {self.scheduler!r}, expected {SCHEDULER_POLICIES}"
            )
        try:
            MemoryMode.parse(self.memory_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.device_preset not in DEVICE_PRESETS:
            raise ConfigError(
                f"unknown device preset {self.device_preset!r}, expected {sorted(DEVICE_PRESETS)}"
            )
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.workload == "trace" and not self.trace_path:
            raise ConfigError("trace workload needs workload.trace_path")
        return self

    def device(self) -> DeviceSpec:
        return DEVICE_PRESETS[self.device_preset]

    def kernel_specs(self, classes: list[str]) -> dict[str, KernelSpec]:
        specs = {}
        for name in classes:
            if name not in KERNEL_PRESETS:
                raise ConfigError(f"no kernel preset for class {name!r}")
            specs[name] = KERNEL_PRESETS[name]
        return specs

    def policy_params(self) -> PolicyParams:
        return PolicyParams(
            aggregation=self.aggregation,
            static_count=self.static_count,
            tick=self.tick,
            timeout_factor=self.timeout_factor,
            window=self.window,
            memory_mode=MemoryMode.parse(self.memory_mode),
            memory_capacity=self.memory_capacity,
            slot_bytes=self.slot_bytes,
            scheduler=self.scheduler,
            static_cpu_fraction=self.static_cpu_fraction,
            scheduler_decay=self.scheduler_decay,
            nearest_target=self.nearest_target,
            max_size_override=dict(self.max_size_override),
        )

    def config_id(self) -> str:
        sched = self.scheduler if self.workload == "md" else self.aggregation
        return f"{self.workload}-{sched}-{self.memory_mode}-seed{self.seed}"


def _coerce(value: str, like) -> object:
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def _apply_section(obj, section: configparser.SectionProxy, label: str) -> None:
    for key, value in section.items():
        if not hasattr(obj, key):
            raise ConfigError(f"unknown key {key!r} in section [{label}]")
        current = getattr(obj, key)
        try:
            setattr(obj, key, _coerce(value, current))
        except ValueError:
            raise ConfigError(f"bad value for {label}.{key}: {value!r}") from None


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Config file -> ExperimentConfig; missing file keys keep defaults."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg.validate()
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    text = Path(path).read_text()
    parser.read_string(text, source=str(path))
    for section in parser.sections():
        if section == "run":
            _apply_section(cfg, parser[section], "run")
        elif section == "workload":
            for key, value in parser[section].items():
                if key == "kind":
                    cfg.workload = value
                elif key == "trace_path":
                    cfg.trace_path = value
                else:
                    raise ConfigError(f"unknown key {key!r} in section [workload]")
        elif section == "aggregator":
            alias = {"policy": "aggregation"}
            for key, value in parser[section].items():
                attr = alias.get(key, key)
                if attr not in (
                    "aggregation", "static_count", "tick", "timeout_factor", "window",
                ):
                    raise ConfigError(f"unknown key {key!r} in section [aggregator]")
                setattr(cfg, attr, _coerce(value, getattr(cfg, attr)))
        elif section == "memory":
            alias = {"mode": "memory_mode", "capacity_bytes": "memory_capacity"}
            for key, value in parser[section].items():
                attr = alias.get(key, key)
                if attr not in ("memory_mode", "memory_capacity", "slot_bytes"):
                    raise ConfigError(f"unknown key {key!r} in section [memory]")
                setattr(cfg, attr, _coerce(value, getattr(cfg, attr)))
        elif section == "scheduler":
            alias = {"policy": "scheduler", "decay": "scheduler_decay"}
            for key, value in parser[section].items():
                attr = alias.get(key, key)
                if attr not in (
                    "scheduler", "static_cpu_fraction", "scheduler_decay", "nearest_target",
                ):
                    raise ConfigError(f"unknown key {key!r} in section [scheduler]")
                setattr(cfg, attr, _coerce(value, getattr(cfg, attr)))
        elif section == "device":
            for key, value in parser[section].items():
                if key != "preset":
                    raise ConfigError(f"unknown key {key!r} in section [device]")
                cfg.device_preset = value
        elif section == "cost":
            cost = dataclasses.asdict(cfg.cost)
            for key, value in parser[section].items():
                if key not in cost:
                    raise ConfigError(f"unknown key {key!r} in section [cost]")
                cost[key] = _coerce(value, cost[key])
            cfg.cost = CostParams(**cost)
        elif section == "nbody":
            _apply_section(cfg.nbody, parser[section], "nbody")
        elif section == "md":
            _apply_section(cfg.md, parser[section], "md")
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return cfg.validate()


def replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy with field overrides (nbody/md params may be passed as dataclasses)."""
    out = dataclasses.replace(cfg, **changes)
    return out.validate()
