"""Hybrid CPU/GPU queue partitioning from running per-item time averages."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MeasurementError

CPU = "CPU"
GPU = "GPU"


@dataclass
class PerfEstimate:
    """Running averages of measured time per data item on each device."""

    cpu_time_per_item: float = 0.0
    gpu_time_per_item: float = 0.0
    cpu_samples: int = 0
    gpu_samples: int = 0
    decay: float = 0.0  # 0 = true cumulative mean; (0,1) = exponential decay

    def sampled_both(self) -> bool:
        return self.cpu_samples > 0 and self.gpu_samples > 0


def record_sample(est: PerfEstimate, device: str, items: int, elapsed: float) -> PerfEstimate:
    """Fold one (items, elapsed) measurement into the device's running average."""
    if items < 1 or elapsed <= 0.0:
        raise MeasurementError(f"bad sample: items={items}, elapsed={elapsed}")
    rate = elapsed / items
    if device == CPU:
        n = est.cpu_samples
        if est.decay > 0.0 and n > 0:
            est.cpu_time_per_item += est.decay * (rate - est.cpu_time_per_item)
        else:
            est.cpu_time_per_item = (est.cpu_time_per_item * n + rate) / (n + 1)
        est.cpu_samples = n + 1
    elif device == GPU:
        n = est.gpu_samples
        if est.decay > 0.0 and n > 0:
            est.gpu_time_per_item += est.decay * (rate - est.gpu_time_per_item)
        else:
            est.gpu_time_per_item = (est.gpu_time_per_item * n + rate) / (n + 1)
        est.gpu_samples = n + 1
    else:
        raise MeasurementError(f"unknown device {device!r}")
    return est


def current_ratio(est: PerfEstimate) -> tuple[float, float]:
    """Work shares proportional to device speed (inverse per-item time).

    Until both devices have at least one sample, split 50/50 so initial
    batches run on both and seed the averages.
    """
    if not est.sampled_both():
        return 0.5, 0.5
    cpu_speed = 1.0 / est.cpu_time_per_item
    gpu_speed = 1.0 / est.gpu_time_per_item
    total = cpu_speed + gpu_speed
    return cpu_speed / total, gpu_speed / total


@dataclass
class Partition:
    cpu_set: list
    gpu_set: list
    cpu_target_items: float
    crossing_items: int = 0  # item count of the request that crossed the target


def partition_queue(
    queue: list,
    est: PerfEstimate,
    cpu_share: float | None = None,
    nearest_target: bool = False,
) -> Partition:
    """Split a work-request queue by cumulative item count.

    The CPU gets the shortest prefix whose cumulative items reach
    total_items * cpu_share (the crossing request included); the suffix goes
    to the GPU.  Order is preserved on both sides.  `cpu_share` defaults to
    the estimate's speed ratio.  With `nearest_target` the crossing request
    stays on the GPU when that lands the prefix closer to the target.
    """
    if cpu_share is None:
        cpu_share, _ = current_ratio(est)
    total_items = sum(wr.item_count for wr in queue)
    target = total_items * cpu_share
    if not queue or target <= 0.0:
        return Partition(cpu_set=[], gpu_set=list(queue), cpu_target_items=target)
    cum = 0.0
    for i, wr in enumerate(queue):
        cum += wr.item_count
        if cum >= target:
            cut = i + 1
            if nearest_target and (cum - target) > (target - (cum - wr.item_count)):
                cut = i
            return Partition(
                cpu_set=list(queue[:cut]),
                gpu_set=list(queue[cut:]),
                cpu_target_items=target,
                crossing_items=wr.item_count,
            )
    return Partition(cpu_set=list(queue), gpu_set=[], cpu_target_items=target,
                     crossing_items=queue[-1].item_count)


def partition_by_count(queue: list, cpu_fraction: float) -> Partition:
    """Static baseline: split by request count alone, ignoring item weights."""
    k = int(len(queue) * cpu_fraction)
    return Partition(cpu_set=list(queue[:k]), gpu_set=list(queue[k:]),
                     cpu_target_items=0.0)
