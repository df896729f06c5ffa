"""Message-driven task runtime and device-cost simulator.

The package pairs an over-decomposed, message-driven execution core with a
deterministic device model so that three adaptive policies can be studied at
desk scale: occupancy- and arrival-aware kernel aggregation, device-memory
reuse with sorted-index coalescing, and ratio-based hybrid CPU/GPU queue
partitioning.
"""

__version__ = "0.1.0"

from .aggregator import AggregatorState, CombinedWorkRequest, compute_max_size
from .devicesim import CostParams, DeviceSpec, KernelSpec, calc_occupancy
from .memory import AccessLayout, DeviceMemory, MemoryMode, SortedIndexArray, TransferPlan
from .runtime import CompletionEvent, Message, Runtime, WorkRequest
from .scheduler import PerfEstimate, Partition, current_ratio, partition_queue
from .timeline import PolicyParams, ScheduleLog, Timeline

__all__ = [
    "AggregatorState",
    "CombinedWorkRequest",
    "compute_max_size",
    "CostParams",
    "DeviceSpec",
    "KernelSpec",
    "calc_occupancy",
    "AccessLayout",
    "DeviceMemory",
    "MemoryMode",
    "SortedIndexArray",
    "TransferPlan",
    "CompletionEvent",
    "Message",
    "Runtime",
    "WorkRequest",
    "PerfEstimate",
    "Partition",
    "current_ratio",
    "partition_queue",
    "PolicyParams",
    "ScheduleLog",
    "Timeline",
    "__version__",
]
