"""Workload generators: N-body tree walks, patch MD, and trace replay."""

from .md import MDParams, MDWorkload, gen_md_system, md_step
from .nbody import (
    NBodyParams,
    NBodyWorkload,
    build_bucket_tree,
    build_interaction_lists,
    direct_force_oracle,
    gen_particles,
)
from .trace import TraceRecord, TraceWorkload, dump_trace, parse_trace, trace_roundtrip

__all__ = [
    "MDParams",
    "MDWorkload",
    "gen_md_system",
    "md_step",
    "NBodyParams",
    "NBodyWorkload",
    "build_bucket_tree",
    "build_interaction_lists",
    "direct_force_oracle",
    "gen_particles",
    "TraceRecord",
    "TraceWorkload",
    "dump_trace",
    "parse_trace",
    "trace_roundtrip",
]
