"""Device model: occupancy calculator and kernel/transfer/CPU cost functions.

Simulated time is unitless; one unit is nominally a millisecond.  All cost
functions are pure and deterministic given their inputs, which is what makes
whole-run schedule logs byte-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import KernelFitError
from .kernels import count_address_runs


@dataclass(frozen=True)
class DeviceSpec:
    """Per-SM resource limits of the simulated accelerator."""

    sm_count: int
    max_threads_per_sm: int
    max_blocks_per_sm: int
    registers_per_sm: int
    shared_mem_per_sm: int


@dataclass(frozen=True)
class KernelSpec:
    """Static resource usage and per-item compute cost of one kernel class."""

    kernel_class: str
    threads_per_block: int
    registers_per_thread: int
    shared_mem_per_block: int
    compute_per_item: float
    block_shape: tuple[int, int] = (0, 0)  # informational (rows, cols)


@dataclass(frozen=True)
class CostParams:
    transfer_latency: float = 0.05
    transfer_bandwidth: float = 200000.0  # bytes per time unit
    launch_overhead: float = 0.02
    mem_transaction_cost: float = 0.02
    cpu_time_per_item_true: float = 0.0002
    cpu_noise: float = 0.0  # multiplicative amplitude, 0 = exact
    noise_seed: int = 0


@dataclass(order=True)
class SimEvent:
    time: float
    seq: int
    kind: str = field(compare=False)  # arrival | tick | kernelDone | transferDone | cpuDone
    payload: object = field(compare=False, default=None)


# 13 SMs / 2048 threads / 16 blocks per SM match the Kepler K20 generation;
# register and shared-memory totals are the architectural values.
DEVICE_PRESETS: dict[str, DeviceSpec] = {
    "kepler-k20": DeviceSpec(
        sm_count=13,
        max_threads_per_sm=2048,
        max_blocks_per_sm=16,
        registers_per_sm=65536,
        shared_mem_per_sm=49152,
    ),
    "unit": DeviceSpec(
        sm_count=1,
        max_threads_per_sm=128,
        max_blocks_per_sm=1,
        registers_per_sm=65536,
        shared_mem_per_sm=49152,
    ),
}

# The force kernel runs a 16x8 block; its register pressure caps it at
# 8 blocks/SM (50% occupancy) on the kepler preset.  The periodic-boundary
# kernel class is register-heavier and lands at 5 blocks/SM (~31%).
KERNEL_PRESETS: dict[str, KernelSpec] = {
    "force": KernelSpec(
        kernel_class="force",
        threads_per_block=128,
        registers_per_thread=64,
        shared_mem_per_block=4096,
        compute_per_item=0.03,
        block_shape=(16, 8),
    ),
    "ewald": KernelSpec(
        kernel_class="ewald",
        threads_per_block=128,
        registers_per_thread=100,
        shared_mem_per_block=6144,
        compute_per_item=0.02,
        block_shape=(16, 8),
    ),
    "md": KernelSpec(
        kernel_class="md",
        threads_per_block=128,
        registers_per_thread=64,
        shared_mem_per_block=4096,
        compute_per_item=0.002,
        block_shape=(16, 8),
    ),
}


def calc_occupancy(k: KernelSpec, d: DeviceSpec) -> tuple[int, float]:
    """Blocks per SM under all four resource limits, plus occupancy fraction.

    Raises KernelFitError when even a single block exceeds some limit.
    """
    limits = [
        d.max_blocks_per_sm,
        d.max_threads_per_sm // k.threads_per_block,
    ]
    if k.registers_per_thread > 0:
        limits.append(d.registers_per_sm // (k.registers_per_thread * k.threads_per_block))
    if k.shared_mem_per_block > 0:
        limits.append(d.shared_mem_per_sm // k.shared_mem_per_block)
    blocks_per_sm = min(limits)
    if blocks_per_sm <= 0:
        raise KernelFitError(
            f"kernel {k.kernel_class!r} fits zero blocks per SM (limits {limits})"
        )
    occupancy = blocks_per_sm * k.threads_per_block / d.max_threads_per_sm
    return blocks_per_sm, occupancy


def occupancy_oracle(k: KernelSpec, d: DeviceSpec) -> int:
    """Exhaustive search for the largest feasible block count (test oracle)."""
    best = 0
    for b in range(1, d.max_blocks_per_sm + 1):
        if b * k.threads_per_block > d.max_threads_per_sm:
            continue
        if b * k.registers_per_thread * k.threads_per_block > d.registers_per_sm:
            continue
        if b * k.shared_mem_per_block > d.shared_mem_per_sm:
            continue
        best = max(best, b)
    return best


def sim_kernel_time(
    block_items: list[int],
    block_transactions: list[int],
    k: KernelSpec,
    d: DeviceSpec,
    p: CostParams,
) -> float:
    """Wave-based combined-kernel duration.

    One thread block per member work request.  Blocks execute in waves of
    (blocks_per_sm * sm_count); each wave costs its slowest block, where a
    block costs items * compute_per_item + transactions * mem_transaction_cost.
    """
    blocks_per_sm, _ = calc_occupancy(k, d)
    active = blocks_per_sm * d.sm_count
    total = p.launch_overhead
    n = len(block_items)
    for start in range(0, n, active):
        wave = 0.0
        for b in range(start, min(start + active, n)):
            t = block_items[b] * k.compute_per_item + block_transactions[b] * p.mem_transaction_cost
            if t > wave:
                wave = t
        total += wave
    return total


def sim_transfer_time(total_bytes: int, indirection_bytes: int, p: CostParams) -> float:
    """Host-to-device copy cost; zero when nothing at all moves."""
    moved = total_bytes + indirection_bytes
    if moved == 0:
        return 0.0
    return p.transfer_latency + moved / p.transfer_bandwidth


def sim_cpu_time(item_counts: list[int], p: CostParams, rng: np.random.Generator | None = None) -> float:
    """Host-side batch cost: linear in items, optionally with seeded noise."""
    total = float(sum(item_counts)) * p.cpu_time_per_item_true
    if p.cpu_noise > 0.0 and rng is not None and total > 0.0:
        total *= 1.0 + p.cpu_noise * (2.0 * rng.random() - 1.0)
    return total


def sim_combined_kernel_time(combined, layout, k: KernelSpec, d: DeviceSpec, p: CostParams) -> float:
    """Duration of one combined batch given its access layout."""
    return sim_kernel_time(
        [wr.item_count for wr in combined.members],
        layout.member_transactions(),
        k,
        d,
        p,
    )


def wave_count(block_count: int, k: KernelSpec, d: DeviceSpec) -> int:
    blocks_per_sm, _ = calc_occupancy(k, d)
    return math.ceil(block_count / (blocks_per_sm * d.sm_count))


__all__ = [
    "DeviceSpec",
    "KernelSpec",
    "CostParams",
    "SimEvent",
    "DEVICE_PRESETS",
    "KERNEL_PRESETS",
    "calc_occupancy",
    "occupancy_oracle",
    "sim_kernel_time",
    "sim_combined_kernel_time",
    "sim_transfer_time",
    "sim_cpu_time",
    "wave_count",
    "count_address_runs",
]
