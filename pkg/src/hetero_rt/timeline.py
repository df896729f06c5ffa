"""Deterministic discrete-event timeline driving runtime, memory, and devices.

CPU and GPU run concurrently in simulated time, each with at most one
outstanding batch (a combined kernel's transfer and execution are serial).
Events are processed in (time, sequence) order, so identical configurations
and seeds replay to byte-identical schedule logs.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import scheduler as sched
from .aggregator import (
    AggregatorState,
    CombinedWorkRequest,
    StaticCountAggregation,
    compute_max_size,
    make_combined,
    poll_combine,
)
from .devicesim import (
    CostParams,
    DeviceSpec,
    KernelSpec,
    calc_occupancy,
    sim_cpu_time,
    sim_kernel_time,
    sim_transfer_time,
)
from .errors import LivenessError
from .memory import DeviceMemory, MemoryMode
from .runtime import CompletionEvent, Message, Runtime, WorkRequest

log = logging.getLogger(__name__)


@dataclass
class PolicyParams:
    """Every policy toggle of one simulated run."""

    aggregation: str = "adaptive"  # adaptive | static_count
    static_count: int = 100
    tick: float = 1.0
    timeout_factor: float = 2.0
    window: int = 0
    memory_mode: MemoryMode = MemoryMode.REUSE_SORTED
    memory_capacity: int = 8 << 20
    slot_bytes: int = 256
    scheduler: str = "gpu_only"  # gpu_only | adaptive | static_count
    static_cpu_fraction: float = 0.5
    scheduler_decay: float = 0.0  # 0 = cumulative running average
    nearest_target: bool = False  # crossing request may stay on the GPU
    max_size_override: dict[str, int] = field(default_factory=dict)


@dataclass
class LogRecord:
    time: float
    kind: str  # arrival | combine | transfer | kernel | cpu | complete | end
    device: str
    batch_id: int
    items: int
    bytes: int
    transactions: int
    duration: float

    def to_line(self) -> str:
        return (
            f"{self.time:.9f},{self.kind},{self.device},{self.batch_id},"
            f"{self.items},{self.bytes},{self.transactions},{self.duration:.9f}"
        )


class ScheduleLog:
    def __init__(self):
        self.records: list[LogRecord] = []

    def add(self, **kw) -> None:
        self.records.append(LogRecord(**kw))

    def serialize(self) -> str:
        return "\n".join(r.to_line() for r in self.records) + "\n"

    def select(self, kind: str) -> list[LogRecord]:
        return [r for r in self.records if r.kind == kind]

    @property
    def makespan(self) -> float:
        arrivals = [r.time for r in self.records if r.kind == "arrival"]
        completions = [r.time for r in self.records if r.kind == "complete"]
        if not arrivals or not completions:
            return 0.0
        return max(completions) - min(arrivals)


@dataclass
class _GpuBatch:
    combined: CombinedWorkRequest
    kernel_time: float = 0.0
    transfer_bytes: int = 0
    transfer_time: float = 0.0
    transactions: int = 0
    start_time: float = 0.0


@dataclass
class _CpuBatch:
    batch_id: int
    members: list[WorkRequest]


class Timeline:
    """Owns the event heap and all per-run state."""

    def __init__(
        self,
        device: DeviceSpec,
        kernel_specs: dict[str, KernelSpec],
        cost: CostParams,
        policy: PolicyParams,
    ):
        self.device = device
        self.kernel_specs = kernel_specs
        self.cost = cost
        self.policy = policy
        self.now = 0.0
        self.runtime = Runtime()
        self.runtime.context = self  # hooks talk to the timeline
        self.schedule_log = ScheduleLog()
        self.estimate = sched.PerfEstimate(decay=policy.scheduler_decay)
        self.partition_log: list[dict] = []

        self._heap: list[tuple[float, int, str, object]] = []
        self._seq = 0
        self._msgq: deque[Message] = deque()
        self._pending_arrival_events = 0
        self._tick_at: float | None = None
        self._next_batch_id = 0
        self._noise_rng = np.random.default_rng(cost.noise_seed)

        self._gpu_queue: deque[_GpuBatch] = deque()
        self._cpu_queue: deque[_CpuBatch] = deque()
        self._gpu_busy = False
        self._cpu_busy = False

        per_class_capacity = max(
            policy.slot_bytes, policy.memory_capacity // max(1, len(kernel_specs))
        )
        self.memories: dict[str, DeviceMemory] = {}
        for name, spec in sorted(kernel_specs.items()):
            calc_occupancy(spec, device)  # fail early on impossible kernels
            max_size = policy.max_size_override.get(name) or compute_max_size(spec, device)
            state = AggregatorState(
                kernel_class=name,
                max_size=max_size,
                timeout_factor=policy.timeout_factor,
                window=policy.window,
            )
            self.runtime.register_group(state)
            self.memories[name] = DeviceMemory(
                per_class_capacity, policy.slot_bytes, policy.memory_mode
            )

        self._static_agg = (
            StaticCountAggregation(policy.static_count)
            if policy.aggregation == "static_count"
            else None
        )
        self._static_flush_due = False
        self.runtime.add_arrival_listener(self._on_arrival)

    # -- workload-facing API ---------------------------------------------------

    def create_chare(self, entries=None) -> int:
        return self.runtime.create_chare(entries)

    def schedule_message(self, time: float, msg: Message) -> None:
        msg.send_time = time
        self._push(time, "arrival", msg)
        self._pending_arrival_events += 1

    def send_message(self, msg: Message) -> None:
        msg.send_time = self.now
        self._msgq.append(msg)

    def submit(self, owner, kernel_class, buffer_indices, item_count, bytes_per_item=0) -> WorkRequest:
        wr = self.runtime.make_work_request(
            owner, kernel_class, buffer_indices, item_count, self.now, bytes_per_item
        )
        self.runtime.submit_work_request(wr, self.now)
        return wr

    # -- internals ---------------------------------------------------------------

    def _push(self, time: float, kind: str, payload=None) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def _on_arrival(self, wr: WorkRequest) -> None:
        self.memories[wr.kernel_class].observe_indices(wr.buffer_indices)
        self.schedule_log.add(
            time=self.now, kind="arrival", device="-", batch_id=wr.id,
            items=wr.item_count, bytes=0, transactions=0, duration=0.0,
        )
        if self._static_agg is not None and self._static_agg.on_arrival():
            self._static_flush_due = True

    def _drain_messages(self) -> None:
        while self._msgq:
            msg = self._msgq.popleft()
            self.runtime.dispatch_ready(msg)

    def _route_members(self, members: list[WorkRequest]) -> None:
        """Split a freshly combined set between CPU and GPU per policy."""
        policy = self.policy.scheduler
        if policy == "gpu_only":
            part = sched.Partition(cpu_set=[], gpu_set=members, cpu_target_items=0.0)
        elif policy == "static_count":
            part = sched.partition_by_count(members, self.policy.static_cpu_fraction)
        else:
            part = sched.partition_queue(
                members, self.estimate, nearest_target=self.policy.nearest_target
            )
            self.partition_log.append(
                {
                    "target": part.cpu_target_items,
                    "cpu_items": float(sum(w.item_count for w in part.cpu_set)),
                    "crossing_items": part.crossing_items,
                    "n_cpu": len(part.cpu_set),
                    "n_gpu": len(part.gpu_set),
                }
            )
        if part.cpu_set:
            bid = self._next_batch_id
            self._next_batch_id += 1
            self._cpu_queue.append(_CpuBatch(bid, part.cpu_set))
            self.schedule_log.add(
                time=self.now, kind="combine", device="CPU", batch_id=bid,
                items=len(part.cpu_set), bytes=0, transactions=0, duration=0.0,
            )
        if part.gpu_set:
            bid = self._next_batch_id
            self._next_batch_id += 1
            combined = make_combined(part.gpu_set, self.now, bid)
            log.debug(
                "t=%.3f combined batch %d: %d blocks, %d distinct buffers",
                self.now, bid, combined.block_count, len(combined.distinct_buffers),
            )
            self._gpu_queue.append(_GpuBatch(combined))
            self.schedule_log.add(
                time=self.now, kind="combine", device="GPU", batch_id=bid,
                items=combined.block_count, bytes=0, transactions=0, duration=0.0,
            )

    def _poll_aggregation(self) -> None:
        for name in sorted(self.runtime.group_lists):
            state = self.runtime.group_lists[name]
            if self._static_agg is not None:
                if self._static_flush_due:
                    self._flush_all(state)
                continue
            while True:
                batch = poll_combine(state, self.now)
                if batch is None:
                    break
                self._route_members(batch.members)
        self._static_flush_due = False

    def _flush_all(self, state: AggregatorState) -> None:
        """Combine everything pending for a class, in max_size chunks."""
        while state.pending:
            take = min(len(state.pending), state.max_size)
            members = [state.pending.popleft() for _ in range(take)]
            self._route_members(members)

    def _no_future_arrivals(self) -> bool:
        return (
            self._pending_arrival_events == 0
            and not self._gpu_busy
            and not self._cpu_busy
            and not self._gpu_queue
            and not self._cpu_queue
        )

    def _maybe_drain(self) -> None:
        # Finite runs must terminate: once nothing can ever arrive or complete,
        # leftover pending requests are flushed regardless of the timeout rule.
        if not self._no_future_arrivals():
            return
        for name in sorted(self.runtime.group_lists):
            self._flush_all(self.runtime.group_lists[name])

    def _launch_gpu(self) -> None:
        if self._gpu_busy or not self._gpu_queue:
            return
        batch = self._gpu_queue.popleft()
        c = batch.combined
        memory = self.memories[c.kernel_class]
        member_indices = [wr.buffer_indices for wr in c.members]
        plan, layout = memory.build_plan(member_indices, self.now)
        spec = self.kernel_specs[c.kernel_class]
        block_items = [wr.item_count for wr in c.members]
        block_tx = layout.member_transactions()
        batch.kernel_time = sim_kernel_time(block_items, block_tx, spec, self.device, self.cost)
        batch.transfer_bytes = plan.total_bytes + plan.indirection_bytes
        batch.transfer_time = sim_transfer_time(plan.total_bytes, plan.indirection_bytes, self.cost)
        batch.transactions = sum(block_tx)
        batch.start_time = self.now
        self._gpu_busy = True
        log.debug(
            "t=%.3f launch batch %d: transfer %.4f, kernel %.4f",
            self.now, c.combined_id, batch.transfer_time, batch.kernel_time,
        )
        self._push(self.now + batch.transfer_time, "transferDone", batch)

    def _launch_cpu(self) -> None:
        if self._cpu_busy or not self._cpu_queue:
            return
        batch = self._cpu_queue.popleft()
        duration = sim_cpu_time(
            [wr.item_count for wr in batch.members], self.cost, self._noise_rng
        )
        self._cpu_busy = True
        self._push(self.now + duration, "cpuDone", (batch, duration))

    def _complete(self, batch_id: int, members: list[WorkRequest], device: str) -> None:
        ev = CompletionEvent(
            combined_id=batch_id,
            member_ids=[wr.id for wr in members],
            device=device,
            finish_time=self.now,
        )
        for msg in self.runtime.on_completion(ev):
            self._msgq.append(msg)
        self.schedule_log.add(
            time=self.now, kind="complete", device=device, batch_id=batch_id,
            items=len(members), bytes=0, transactions=0, duration=0.0,
        )

    def _handle(self, kind: str, payload) -> None:
        if kind == "arrival":
            self._pending_arrival_events -= 1
            self.runtime.dispatch_ready(payload)
        elif kind == "tick":
            self._tick_at = None
        elif kind == "transferDone":
            batch: _GpuBatch = payload
            total_items = sum(wr.item_count for wr in batch.combined.members)
            self.schedule_log.add(
                time=self.now, kind="transfer", device="GPU",
                batch_id=batch.combined.combined_id, items=total_items,
                bytes=batch.transfer_bytes, transactions=0, duration=batch.transfer_time,
            )
            self._push(self.now + batch.kernel_time, "kernelDone", batch)
        elif kind == "kernelDone":
            batch = payload
            c = batch.combined
            total_items = sum(wr.item_count for wr in c.members)
            self.schedule_log.add(
                time=self.now, kind="kernel", device="GPU", batch_id=c.combined_id,
                items=total_items, bytes=0, transactions=batch.transactions,
                duration=batch.kernel_time,
            )
            self.memories[c.kernel_class].release_batch([w.buffer_indices for w in c.members])
            self._gpu_busy = False
            elapsed = self.now - batch.start_time
            if total_items > 0 and elapsed > 0:
                sched.record_sample(self.estimate, sched.GPU, total_items, elapsed)
            self._complete(c.combined_id, c.members, sched.GPU)
        elif kind == "cpuDone":
            batch, duration = payload
            total_items = sum(wr.item_count for wr in batch.members)
            self.schedule_log.add(
                time=self.now, kind="cpu", device="CPU", batch_id=batch.batch_id,
                items=total_items, bytes=0, transactions=0, duration=duration,
            )
            self._cpu_busy = False
            if total_items > 0 and duration > 0:
                sched.record_sample(self.estimate, sched.CPU, total_items, duration)
            self._complete(batch.batch_id, batch.members, sched.CPU)
        else:  # pragma: no cover - defensive
            raise AssertionError(f"unknown event kind {kind!r}")

    def _manage_tick(self) -> None:
        if self._static_agg is not None:
            return  # static combining is arrival-counted, no timeout to poll
        has_pending = any(s.pending for s in self.runtime.group_lists.values())
        if has_pending and self._tick_at is None:
            step = self.policy.tick
            nxt = (math.floor(self.now / step) + 1) * step
            self._tick_at = nxt
            self._push(nxt, "tick", None)

    def run(self) -> ScheduleLog:
        while self._heap:
            time, _, kind, payload = heapq.heappop(self._heap)
            if kind == "tick" and (self._tick_at is None or time != self._tick_at):
                continue  # stale tick superseded by a newer schedule
            self.now = max(self.now, time)
            self._handle(kind, payload)
            self._drain_messages()
            self._poll_aggregation()
            self._maybe_drain()
            self._launch_gpu()
            self._launch_cpu()
            self._drain_messages()
            self._manage_tick()
        if self.runtime.pending_count > 0:
            dump = {
                "pending_ids": self.runtime.pending_ids()[:20],
                "group_lists": {
                    k: len(v.pending) for k, v in self.runtime.group_lists.items()
                },
                "gpu_queue": len(self._gpu_queue),
                "cpu_queue": len(self._cpu_queue),
            }
            raise LivenessError(f"event loop dry with pending work: {dump}")
        self.schedule_log.add(
            time=self.now, kind="end", device="-", batch_id=0, items=0, bytes=0,
            transactions=0, duration=self.schedule_log.makespan,
        )
        return self.schedule_log
