"""Message-driven execution core.

Chares are addressable objects whose entry methods fire once all of their
declared inputs have arrived.  Entry-method bodies are plain callback hooks
supplied by the workload; a hook typically creates work requests, which land
in per-kernel-class group lists (the aggregator state) for combining.
Completion notifications travel back through the same message queue, one
callback message per finished work request.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .aggregator import AggregatorState, observe_arrival
from .errors import ConsistencyError, DuplicateWorkRequestError, RoutingError

ChareId = int

CALLBACK_ENTRY = "work_done"


@dataclass
class Message:
    target: ChareId
    entry_method: str
    payload_size: int = 0
    inputs_required: int = 1
    send_time: float = 0.0
    payload: object = None


@dataclass
class WorkRequest:
    id: int
    owner: ChareId
    kernel_class: str
    buffer_indices: list[int]
    item_count: int
    arrival_time: float
    bytes_per_item: int = 0


@dataclass
class CompletionEvent:
    combined_id: int
    member_ids: list[int]
    device: str
    finish_time: float


@dataclass
class _Entry:
    inputs_required: int
    hook: object  # callable(runtime, Message) or None
    received: int = 0


@dataclass
class InvocationRecord:
    time: float
    chare: ChareId
    entry_method: str
    messages_consumed: int


class Runtime:
    """One message-driven runtime instance (single-threaded, deterministic)."""

    def __init__(self):
        self._chares: dict[ChareId, dict[str, _Entry]] = {}
        self._next_chare = 0
        self._next_wr_id = 0
        self.group_lists: dict[str, AggregatorState] = {}
        self.invocations: list[InvocationRecord] = []
        self._submitted: dict[int, WorkRequest] = {}
        self._completed: set[int] = set()
        self._arrival_listeners: list = []
        self.context = self  # first argument passed to entry-method hooks

    # -- chares and entry methods -------------------------------------------

    def create_chare(self, entries: dict[str, tuple[int, object]] | None = None) -> ChareId:
        cid = self._next_chare
        self._next_chare += 1
        table = {CALLBACK_ENTRY: _Entry(1, None)}
        for name, (inputs_required, hook) in (entries or {}).items():
            table[name] = _Entry(inputs_required, hook)
        self._chares[cid] = table
        return cid

    def set_entry(self, cid: ChareId, name: str, inputs_required: int, hook) -> None:
        self._chares[cid][name] = _Entry(inputs_required, hook)

    def dispatch_ready(self, msg: Message) -> InvocationRecord | None:
        """Deliver one message; run the entry method if its inputs are complete."""
        table = self._chares.get(msg.target)
        if table is None:
            raise RoutingError(f"message to unknown chare {msg.target}")
        entry = table.get(msg.entry_method)
        if entry is None:
            raise RoutingError(
                f"chare {msg.target} has no entry method {msg.entry_method!r}"
            )
        entry.received += 1
        if entry.received < entry.inputs_required:
            return None
        entry.received = 0
        record = InvocationRecord(
            time=msg.send_time,
            chare=msg.target,
            entry_method=msg.entry_method,
            messages_consumed=entry.inputs_required,
        )
        self.invocations.append(record)
        if entry.hook is not None:
            entry.hook(self.context, msg)
        return record

    # -- work requests --------------------------------------------------------

    def register_group(self, state: AggregatorState) -> None:
        self.group_lists[state.kernel_class] = state

    def add_arrival_listener(self, fn) -> None:
        """fn(wr) runs after every accepted submission (timeline wiring)."""
        self._arrival_listeners.append(fn)

    def make_work_request(
        self,
        owner: ChareId,
        kernel_class: str,
        buffer_indices: list[int],
        item_count: int,
        now: float,
        bytes_per_item: int = 0,
    ) -> WorkRequest:
        wr = WorkRequest(
            id=self._next_wr_id,
            owner=owner,
            kernel_class=kernel_class,
            buffer_indices=list(buffer_indices),
            item_count=item_count,
            arrival_time=now,
            bytes_per_item=bytes_per_item,
        )
        self._next_wr_id += 1
        return wr

    def submit_work_request(self, wr: WorkRequest, now: float) -> None:
        """Append to the kernel class's group list and record the arrival."""
        if wr.id in self._submitted:
            raise DuplicateWorkRequestError(f"work request {wr.id} submitted twice")
        if wr.kernel_class not in self.group_lists:
            raise RoutingError(f"no group list for kernel class {wr.kernel_class!r}")
        wr.arrival_time = now
        self._submitted[wr.id] = wr
        state = self.group_lists[wr.kernel_class]
        state.pending.append(wr)
        observe_arrival(state, now)
        for fn in self._arrival_listeners:
            fn(wr)

    def on_completion(self, ev: CompletionEvent) -> list[Message]:
        """Mark members complete and build one callback message per member."""
        messages = []
        for wr_id in ev.member_ids:
            wr = self._submitted.get(wr_id)
            if wr is None:
                raise ConsistencyError(f"completion for unknown work request {wr_id}")
            if wr_id in self._completed:
                raise ConsistencyError(f"work request {wr_id} completed twice")
            if ev.finish_time < wr.arrival_time:
                raise ConsistencyError(
                    f"completion at {ev.finish_time} precedes arrival {wr.arrival_time}"
                )
            self._completed.add(wr_id)
            messages.append(
                Message(
                    target=wr.owner,
                    entry_method=CALLBACK_ENTRY,
                    payload_size=0,
                    inputs_required=1,
                    send_time=ev.finish_time,
                    payload=(ev.combined_id, wr_id, ev.device),
                )
            )
        return messages

    # -- accounting -------------------------------------------------------------

    @property
    def submitted_count(self) -> int:
        return len(self._submitted)

    @property
    def completed_count(self) -> int:
        return len(self._completed)

    @property
    def pending_count(self) -> int:
        return len(self._submitted) - len(self._completed)

    def pending_ids(self) -> list[int]:
        return [i for i in self._submitted if i not in self._completed]
