"""Combining policy: when do pending work requests become one kernel launch.

Two triggers exist per kernel class.  Reaching `max_size` pending requests
(the occupancy-derived block budget) combines immediately; otherwise a class
is flushed once the gap since its last arrival exceeds `timeout_factor`
times the running maximum of inter-arrival gaps, so a lull never leaves the
device idle for much longer than the burstiest gap seen so far.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .devicesim import DeviceSpec, KernelSpec, calc_occupancy
from .errors import ClockError, GroupingError

DEFAULT_TIMEOUT_FACTOR = 2.0


def compute_max_size(k: KernelSpec, d: DeviceSpec) -> int:
    """Work requests per combined kernel: one thread block each, all SMs full."""
    blocks_per_sm, _ = calc_occupancy(k, d)
    return blocks_per_sm * d.sm_count


@dataclass
class AggregatorState:
    """Pending work and arrival statistics for one kernel class."""

    kernel_class: str
    max_size: int
    timeout_factor: float = DEFAULT_TIMEOUT_FACTOR
    window: int = 0  # >0 keeps only the last `window` gaps (experimental)
    max_interval: float | None = None  # None until two arrivals were seen
    last_arrival_time: float | None = None
    pending: deque = field(default_factory=deque)
    _gaps: deque = field(default_factory=deque, repr=False)


def observe_arrival(state: AggregatorState, now: float) -> AggregatorState:
    """Record an arrival timestamp, updating the running maximum gap."""
    if state.last_arrival_time is not None:
        if now < state.last_arrival_time:
            raise ClockError(
                f"arrival at {now} precedes last arrival {state.last_arrival_time}"
            )
        gap = now - state.last_arrival_time
        if state.window > 0:
            state._gaps.append(gap)
            while len(state._gaps) > state.window:
                state._gaps.popleft()
            state.max_interval = max(state._gaps)
        else:
            state.max_interval = gap if state.max_interval is None else max(state.max_interval, gap)
    state.last_arrival_time = now
    return state


@dataclass
class CombinedWorkRequest:
    combined_id: int
    kernel_class: str
    members: list
    distinct_buffers: list[int]
    block_count: int
    create_time: float


def make_combined(members: list, now: float, combined_id: int = 0) -> CombinedWorkRequest:
    """Merge same-class work requests into one batch (one block per member)."""
    if not members:
        raise GroupingError("cannot combine zero work requests")
    kernel_class = members[0].kernel_class
    for wr in members[1:]:
        if wr.kernel_class != kernel_class:
            raise GroupingError(
                f"mixed kernel classes {kernel_class!r} and {wr.kernel_class!r}"
            )
    distinct = sorted({b for wr in members for b in wr.buffer_indices})
    return CombinedWorkRequest(
        combined_id=combined_id,
        kernel_class=kernel_class,
        members=list(members),
        distinct_buffers=distinct,
        block_count=len(members),
        create_time=now,
    )


def poll_combine(state: AggregatorState, now: float, combined_id: int = 0) -> CombinedWorkRequest | None:
    """Combine if the size or timeout rule fires, else None.

    Size rule: at least max_size pending -> take exactly the max_size earliest.
    Timeout rule: pending non-empty and the idle gap strictly exceeds
    timeout_factor * max_interval -> take everything.  Before two arrivals
    exist the running maximum is unknown and treated as infinite.
    """
    if not state.pending:
        return None
    if len(state.pending) >= state.max_size:
        members = [state.pending.popleft() for _ in range(state.max_size)]
        return make_combined(members, now, combined_id)
    if state.max_interval is None or state.last_arrival_time is None:
        return None
    if now - state.last_arrival_time > state.timeout_factor * state.max_interval:
        members = list(state.pending)
        state.pending.clear()
        return make_combined(members, now, combined_id)
    return None


class StaticCountAggregation:
    """Baseline: flush the available set after every `count` arrivals."""

    def __init__(self, count: int = 100):
        self.count = count
        self._since_flush = 0

    def on_arrival(self) -> bool:
        self._since_flush += 1
        if self._since_flush >= self.count:
            self._since_flush = 0
            return True
        return False
