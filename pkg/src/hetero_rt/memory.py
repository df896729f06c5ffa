"""Device-memory bookkeeping: residency, transfer planning, and coalescing.

Three placement modes are modeled.  ``REDUNDANT`` re-copies every referenced
buffer into a fresh contiguous staging region each launch (fully coalesced
access, maximum bytes moved).  ``REUSE`` copies only buffers that are not
already resident and accesses them through an address table (scattered,
indirect access).  ``REUSE_SORTED`` also copies only missing buffers but
allocates and accesses them in ascending buffer-index order, which recovers
locally contiguous runs because earlier sorted batches laid residents out in
index order too.

Addresses are slot-granular integers; one buffer occupies one uniform slot.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CapacityError
from .kernels import count_address_runs

HALF_WARP = 16  # threads whose contiguous accesses coalesce into one transaction
ADDRESS_BYTES = 4  # per address-table entry in the indirect modes


class MemoryMode(Enum):
    REDUNDANT = "redundant"
    REUSE = "reuse"
    REUSE_SORTED = "reuse_sorted"

    @classmethod
    def parse(cls, name: str) -> "MemoryMode":
        for m in cls:
            if m.value == name:
                return m
        raise ValueError(f"unknown memory mode {name!r}")


@dataclass
class DeviceSlot:
    slot_index: int
    size_bytes: int
    last_use_time: float


class ChareTable:
    """Injective map from application buffer index to a device slot."""

    def __init__(self):
        self._entries: dict[int, DeviceSlot] = {}

    def __contains__(self, buffer: int) -> bool:
        return buffer in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, buffer: int) -> DeviceSlot | None:
        return self._entries.get(buffer)

    def put(self, buffer: int, slot: DeviceSlot) -> None:
        self._entries[buffer] = slot

    def remove(self, buffer: int) -> DeviceSlot:
        return self._entries.pop(buffer)

    def buffers(self) -> list[int]:
        return list(self._entries)

    def slot_indices(self) -> list[int]:
        return [s.slot_index for s in self._entries.values()]


def lookup_residency(
    table: ChareTable, buffer_indices: list[int], now: float = 0.0
) -> tuple[list[int], list[int]]:
    """Partition buffer indices into (resident, missing), preserving order.

    Resident entries get their LRU timestamp refreshed.
    """
    resident, missing = [], []
    for b in buffer_indices:
        slot = table.get(b)
        if slot is None:
            missing.append(b)
        else:
            slot.last_use_time = now
            resident.append(b)
    return resident, missing


class DeviceHeap:
    """Uniform-slot allocator over a fixed byte capacity."""

    def __init__(self, capacity_bytes: int, slot_bytes: int):
        if slot_bytes <= 0 or capacity_bytes < slot_bytes:
            raise ValueError("heap needs room for at least one slot")
        self.capacity_bytes = capacity_bytes
        self.slot_bytes = slot_bytes
        self.slot_count = capacity_bytes // slot_bytes
        self._free: list[int] = list(range(self.slot_count))
        heapq.heapify(self._free)

    @property
    def used_bytes(self) -> int:
        return (self.slot_count - len(self._free)) * self.slot_bytes

    @property
    def free_slots(self) -> int:
        return len(self._free)

    def allocate(self) -> int:
        if not self._free:
            raise CapacityError("device heap full")
        return heapq.heappop(self._free)

    def release(self, slot_index: int) -> None:
        heapq.heappush(self._free, slot_index)


class SortedIndexArray:
    """Strictly ascending, deduplicated buffer indices.

    New indices are placed by binary search so the array never needs a full
    re-sort; element comparisons are counted so the incremental cost can be
    checked against the batch-sort alternative.
    """

    def __init__(self):
        self._indices: list[int] = []
        self.comparisons = 0
        self.inserts = 0

    def __len__(self) -> int:
        return len(self._indices)

    @property
    def indices(self) -> list[int]:
        return list(self._indices)

    def position(self, idx: int) -> int | None:
        """Current position of `idx`, or None if absent."""
        lo, hi = 0, len(self._indices)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._indices[mid] < idx:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self._indices) and self._indices[lo] == idx:
            return lo
        return None

    def insert(self, idx: int) -> int:
        """Insert keeping ascending order; duplicates return their position."""
        self.inserts += 1
        arr = self._indices
        lo, hi = 0, len(arr)
        while lo < hi:
            mid = (lo + hi) // 2
            self.comparisons += 1
            if arr[mid] < idx:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(arr):
            self.comparisons += 1
            if arr[lo] == idx:
                return lo
        arr.insert(lo, idx)
        return lo


def insert_sorted_index(arr: SortedIndexArray, idx: int) -> int:
    return arr.insert(idx)


@dataclass
class TransferPlan:
    to_transfer: list[tuple[int, int]]  # (buffer index, bytes)
    total_bytes: int
    indirection_bytes: int  # address-table bytes, 0 in redundant mode
    mode: MemoryMode


@dataclass
class AccessLayout:
    """Device address per logical item position, one thread block per member."""

    addresses: np.ndarray  # int64, logical position -> slot-granular address
    member_bounds: np.ndarray  # int64 prefix offsets, len = members + 1
    indirect: bool  # every access costs an extra address-table read

    def address_of(self, position: int) -> int:
        return int(self.addresses[position])

    def member_addresses(self, m: int) -> np.ndarray:
        return self.addresses[self.member_bounds[m] : self.member_bounds[m + 1]]

    def member_transactions(self) -> list[int]:
        mult = 2 if self.indirect else 1
        return [
            count_address_runs(self.member_addresses(m), HALF_WARP) * mult
            for m in range(len(self.member_bounds) - 1)
        ]

    def total_transactions(self) -> int:
        return sum(self.member_transactions())


def transaction_count(layout: AccessLayout, item_count: int) -> int:
    """Memory transactions for the first `item_count` accesses of one stream.

    Items are read by half warps of 16 threads; each maximal run of
    consecutive addresses inside a half warp is one transaction, and indirect
    layouts pay a second transaction per run for the address-table read.
    """
    if item_count < 1:
        raise ValueError("item_count must be >= 1")
    runs = count_address_runs(layout.addresses[:item_count], HALF_WARP)
    return runs * 2 if layout.indirect else runs


class DeviceMemory:
    """Residency manager for one kernel class (uniform slot size)."""

    def __init__(self, capacity_bytes: int, slot_bytes: int, mode: MemoryMode):
        self.mode = mode
        self.heap = DeviceHeap(capacity_bytes, slot_bytes)
        self.table = ChareTable()
        self.sorted_index = SortedIndexArray()
        self._pins: dict[int, int] = {}

    # -- pinning (in-flight batches must not be evicted) --------------------

    def pin(self, buffers: list[int]) -> None:
        for b in set(buffers):
            self._pins[b] = self._pins.get(b, 0) + 1

    def unpin(self, buffers: list[int]) -> None:
        for b in set(buffers):
            n = self._pins.get(b, 0) - 1
            if n <= 0:
                self._pins.pop(b, None)
            else:
                self._pins[b] = n

    def observe_indices(self, buffer_indices: list[int]) -> None:
        """Feed request indices into the per-class sorted array (sorted mode)."""
        if self.mode is MemoryMode.REUSE_SORTED:
            for b in buffer_indices:
                self.sorted_index.insert(b)

    # -- eviction ------------------------------------------------------------

    def evict_slots(self, needed_bytes: int) -> list[int]:
        """Free least-recently-used unpinned buffers until `needed_bytes` fit."""
        if needed_bytes > self.heap.capacity_bytes:
            raise CapacityError(
                f"request of {needed_bytes} bytes exceeds capacity {self.heap.capacity_bytes}"
            )
        evicted = []
        free_bytes = self.heap.free_slots * self.heap.slot_bytes
        if free_bytes >= needed_bytes:
            return evicted
        candidates = sorted(
            (b for b in self.table.buffers() if b not in self._pins),
            key=lambda b: (self.table.get(b).last_use_time, b),
        )
        for b in candidates:
            if free_bytes >= needed_bytes:
                break
            slot = self.table.remove(b)
            self.heap.release(slot.slot_index)
            evicted.append(b)
            free_bytes += self.heap.slot_bytes
        if free_bytes < needed_bytes:
            raise CapacityError(
                f"pinned buffers exhaust capacity: need {needed_bytes}, freeable {free_bytes}"
            )
        return evicted

    # -- planning --------------------------------------------------------------

    def build_plan(
        self, member_indices: list[list[int]], now: float = 0.0
    ) -> tuple[TransferPlan, AccessLayout]:
        """Plan transfers and the per-block access layout for one combined batch.

        `member_indices` holds each member work request's buffer list in its
        original (traversal) order.  Buffers of the batch are pinned until
        `release_batch` is called.
        """
        if self.mode is MemoryMode.REDUNDANT:
            return self._plan_redundant(member_indices)
        return self._plan_reuse(member_indices, now)

    def _plan_redundant(self, member_indices):
        staged = [b for member in member_indices for b in member]
        slot_bytes = self.heap.slot_bytes
        if len(staged) > self.heap.slot_count:
            raise CapacityError(
                f"staging {len(staged)} buffers exceeds {self.heap.slot_count} slots"
            )
        addresses = np.arange(len(staged), dtype=np.int64)
        bounds = np.cumsum([0] + [len(m) for m in member_indices]).astype(np.int64)
        plan = TransferPlan(
            to_transfer=[(b, slot_bytes) for b in staged],
            total_bytes=len(staged) * slot_bytes,
            indirection_bytes=0,
            mode=self.mode,
        )
        return plan, AccessLayout(addresses=addresses, member_bounds=bounds, indirect=False)

    def _plan_reuse(self, member_indices, now):
        slot_bytes = self.heap.slot_bytes
        distinct: list[int] = []
        seen: set[int] = set()
        for member in member_indices:
            for b in member:
                if b not in seen:
                    seen.add(b)
                    distinct.append(b)
        _, missing = lookup_residency(self.table, distinct, now)
        if self.mode is MemoryMode.REUSE_SORTED:
            missing = sorted(missing)  # allocation follows ascending index order

        self.pin(distinct)
        try:
            self.evict_slots(len(missing) * slot_bytes)
        except CapacityError:
            self.unpin(distinct)
            raise
        for b in missing:
            slot_index = self.heap.allocate()
            self.table.put(b, DeviceSlot(slot_index, slot_bytes, now))

        positions = []
        bounds = [0]
        for member in member_indices:
            order = sorted(member) if self.mode is MemoryMode.REUSE_SORTED else member
            positions.extend(self.table.get(b).slot_index for b in order)
            bounds.append(len(positions))
        addresses = np.asarray(positions, dtype=np.int64)
        plan = TransferPlan(
            to_transfer=[(b, slot_bytes) for b in missing],
            total_bytes=len(missing) * slot_bytes,
            indirection_bytes=ADDRESS_BYTES * len(positions),
            mode=self.mode,
        )
        layout = AccessLayout(
            addresses=addresses,
            member_bounds=np.asarray(bounds, dtype=np.int64),
            indirect=True,
        )
        return plan, layout

    def release_batch(self, member_indices: list[list[int]]) -> None:
        if self.mode is MemoryMode.REDUNDANT:
            return
        self.unpin([b for member in member_indices for b in member])

    def check_injective(self) -> bool:
        slots = self.table.slot_indices()
        return len(slots) == len(set(slots))
