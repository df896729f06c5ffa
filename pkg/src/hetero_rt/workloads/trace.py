"""Work-request stream capture and replay.

A trace is line-delimited text, one request per line:

    arrival_time kernel_class idx0,idx1,... item_count bytes_per_item

Dumping a generated stream and replaying the file must reproduce the exact
request sequence, so regression fixtures can run without the generators.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..errors import TraceFormatError
from ..runtime import Message
from .md import MDParams, gen_md_system, md_step, pair_work
from .nbody import NBodyParams, NBodyWorkload


@dataclass(frozen=True)
class TraceRecord:
    arrival_time: float
    kernel_class: str
    buffer_indices: tuple[int, ...]
    item_count: int
    bytes_per_item: int

    def to_line(self) -> str:
        idx = ",".join(str(i) for i in self.buffer_indices)
        # repr round-trips floats exactly, so replay equals the recorded stream
        return (
            f"{self.arrival_time!r} {self.kernel_class} {idx} "
            f"{self.item_count} {self.bytes_per_item}"
        )


def dump_trace(records: list[TraceRecord], path: str | Path) -> None:
    Path(path).write_text("".join(r.to_line() + "\n" for r in records))


def parse_trace(path: str | Path) -> list[TraceRecord]:
    records = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise TraceFormatError(line_no, f"expected 5 fields, got {len(parts)}")
        try:
            t = float(parts[0])
            indices = tuple(int(x) for x in parts[2].split(","))
            items = int(parts[3])
            bpi = int(parts[4])
        except ValueError as exc:
            raise TraceFormatError(line_no, str(exc)) from None
        if items < 1 or not indices:
            raise TraceFormatError(line_no, "need at least one item and one buffer")
        records.append(TraceRecord(t, parts[1], indices, items, bpi))
    return records


def trace_roundtrip(records: list[TraceRecord], path: str | Path) -> list[str]:
    """Dump, re-parse, and diff; an empty list means a faithful round trip."""
    dump_trace(records, path)
    replayed = parse_trace(path)
    problems = []
    if len(replayed) != len(records):
        problems.append(f"length {len(records)} -> {len(replayed)}")
    for i, (a, b) in enumerate(zip(records, replayed)):
        if a != b:
            problems.append(f"line {i + 1}: {a} != {b}")
    return problems


# -- open-loop stream generators ------------------------------------------------

def nbody_stream(params: NBodyParams) -> list[TraceRecord]:
    w = NBodyWorkload(params)
    records = []
    for il, when in zip(w.lists, w.arrival_times):
        records.append(
            TraceRecord(when, "force", tuple(il.walk_order), il.item_count,
                        params.bytes_per_item)
        )
        if params.ewald:
            bucket = il.bucket_id
            records.append(
                TraceRecord(
                    when, "ewald", (bucket,),
                    max(1, len(w.tree.nodes[bucket].particle_idx)),
                    params.bytes_per_item,
                )
            )
    return records


def md_stream(params: MDParams, step_gap: float = 50.0) -> list[TraceRecord]:
    """MD arrivals on a nominal fixed step schedule (open loop)."""
    grid, _ = gen_md_system(
        (params.rows, params.cols), params.particles_per_patch,
        params.cutoff, params.seed,
    )
    records = []
    for step in range(params.steps):
        start = step * step_gap
        pops = grid.populations().astype(float)
        for a, b, items in pair_work(grid, params.periodic):
            when = start + params.ready_cost * max(pops[a], pops[b])
            buffers = (a,) if a == b else (a, b)
            records.append(
                TraceRecord(when, "md", buffers, items, params.bytes_per_item)
            )
        md_step(grid, params.dt, params.stiffness, params.periodic)
    records.sort(key=lambda r: r.arrival_time)
    return records


class TraceWorkload:
    """Feeds a recorded stream back through the message-driven runtime."""

    def __init__(self, records: list[TraceRecord]):
        self.records = records

    def kernel_classes(self) -> list[str]:
        classes = sorted({r.kernel_class for r in self.records})
        return classes or ["force"]

    def setup(self, tl) -> None:
        cid = tl.create_chare({"replay": (1, self._replay)})
        for rec in self.records:
            tl.schedule_message(
                rec.arrival_time,
                Message(target=cid, entry_method="replay", payload=rec),
            )

    @staticmethod
    def _replay(tl, msg) -> None:
        rec: TraceRecord = msg.payload
        tl.submit(
            msg.target, rec.kernel_class, list(rec.buffer_indices),
            rec.item_count, rec.bytes_per_item,
        )
