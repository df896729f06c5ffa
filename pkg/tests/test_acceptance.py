"""Acceptance suite: one test per exit criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Frozen regression values were computed once with the shipped
calibration and are asserted exactly (the simulator is deterministic).
"""

import dataclasses
import functools
import math
import time

import numpy as np

from hetero_rt.aggregator import (
    AggregatorState,
    compute_max_size,
    observe_arrival,
    poll_combine,
)
from hetero_rt.config import ExperimentConfig
from hetero_rt.devicesim import (
    DEVICE_PRESETS,
    KERNEL_PRESETS,
    calc_occupancy,
    occupancy_oracle,
)
from hetero_rt.errors import KernelFitError
from hetero_rt.experiments import (
    build_workload,
    run_experiment,
    run_single,
    summarize,
    write_results,
)
from hetero_rt.memory import DeviceMemory, MemoryMode, SortedIndexArray, transaction_count
from hetero_rt.runtime import WorkRequest
from hetero_rt.timeline import Timeline
from hetero_rt.workloads import nbody as nb

KEPLER = DEVICE_PRESETS["kepler-k20"]

# frozen regression values (computed once with the shipped calibration)
FROZEN_ADAPTIVE_MAKESPAN = 132.79969010252435
FROZEN_STATIC_MAKESPAN = 135.45324917458387
FROZEN_COMBINING_GAP = 0.01959022089340497  # (static - adaptive) / static
FROZEN_THETA05_MEDIAN_LIMIT = 4.0e-3  # measured 2.70e-3 on the frozen fixture


def report(criterion: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {criterion}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


def test_criterion_01_occupancy_fixture():
    start = time.perf_counter()
    blocks, occupancy = calc_occupancy(KERNEL_PRESETS["force"], KEPLER)
    max_size = compute_max_size(KERNEL_PRESETS["force"], KEPLER)
    elapsed = time.perf_counter() - start
    ok = max_size == 104 and occupancy == 0.50 and blocks == 8 and elapsed < 1e-3
    report(
        "criterion 1: occupancy fixture 104 blocks at 50%",
        ok,
        f"max_size={max_size} occupancy={occupancy} in {elapsed * 1e6:.0f}us",
    )


def test_criterion_02_occupancy_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(10_000):
        d = KEPLER.__class__(
            sm_count=int(rng.integers(1, 32)),
            max_threads_per_sm=int(rng.integers(128, 4096)),
            max_blocks_per_sm=int(rng.integers(1, 33)),
            registers_per_sm=int(rng.integers(1 << 12, 1 << 17)),
            shared_mem_per_sm=int(rng.integers(1 << 12, 1 << 17)),
        )
        k = KERNEL_PRESETS["force"].__class__(
            kernel_class="r",
            threads_per_block=int(rng.integers(1, 1025)),
            registers_per_thread=int(rng.integers(1, 256)),
            shared_mem_per_block=int(rng.integers(1, 1 << 15)),
            compute_per_item=1.0,
        )
        expected = occupancy_oracle(k, d)
        try:
            blocks, _ = calc_occupancy(k, d)
        except KernelFitError:
            blocks = 0
        if blocks != expected:
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 1.0
    report(
        "criterion 2: occupancy matches exhaustive oracle on 1e4 specs",
        ok,
        f"mismatches={mismatches} in {elapsed:.2f}s",
    )


def _reference_emissions(arrivals, max_size, poll_times, timeout_factor=2.0):
    # straight-line restatement of the combining rule, kept independent of
    # the AggregatorState implementation it checks
    emissions, pending = [], []
    last_arrival = None
    max_interval = None
    ai = 0
    for t in sorted(set(poll_times) | {a for a, _ in arrivals}):
        while ai < len(arrivals) and arrivals[ai][0] <= t:
            at, aid = arrivals[ai]
            if last_arrival is not None:
                gap = at - last_arrival
                max_interval = gap if max_interval is None else max(max_interval, gap)
            last_arrival = at
            pending.append(aid)
            ai += 1
        while len(pending) >= max_size:
            emissions.append((t, tuple(pending[:max_size])))
            pending = pending[max_size:]
        if pending and max_interval is not None and t - last_arrival > timeout_factor * max_interval:
            emissions.append((t, tuple(pending)))
            pending = []
    return emissions


def test_criterion_03_aggregation_rule_equivalence():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(20, 160))
        t = 0.0
        arrivals = []
        for i in range(n):
            t += float(rng.uniform(3.0, 20.0)) if rng.random() < 0.08 else float(rng.uniform(0.0, 0.6))
            arrivals.append((t, i))
        max_size = int(rng.integers(2, 24))
        polls = [float(x) for x in np.arange(0.0, arrivals[-1][0] + 60.0, 1.0)]

        state = AggregatorState("force", max_size=max_size)
        got = []
        ai = 0
        for pt in sorted(set(polls) | {a for a, _ in arrivals}):
            while ai < len(arrivals) and arrivals[ai][0] <= pt:
                at, aid = arrivals[ai]
                state.pending.append(
                    WorkRequest(aid, 0, "force", [aid], 1, at)
                )
                observe_arrival(state, at)
                ai += 1
            while True:
                batch = poll_combine(state, pt)
                if batch is None:
                    break
                got.append((pt, tuple(m.id for m in batch.members)))
        ref = _reference_emissions(arrivals, max_size, polls)
        assert got == ref
        assert all(len(ids) <= max_size for _, ids in got)
        checked += 1
    elapsed = time.perf_counter() - start
    ok = checked == 1000 and elapsed < 5.0
    report(
        "criterion 3: combining rule equals straight-line reference on 1e3 traces",
        ok,
        f"{checked} traces in {elapsed:.2f}s",
    )


def test_criterion_04_sorted_index_properties():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    for case in range(1000):
        if case == 0:
            n = 10_000  # pin the upper end of the allowed sequence length
        else:
            n = int(np.exp(rng.uniform(np.log(10), np.log(10_000))))
        values = rng.integers(0, max(2, n // 2), size=n)  # plenty of duplicates
        arr = SortedIndexArray()
        for v in values:
            arr.insert(int(v))
        assert arr.indices == sorted(set(values.tolist()))
        bound = 2.0 * math.lgamma(n + 1) / math.log(2.0)
        assert arr.comparisons <= max(bound, 2.0), (arr.comparisons, bound, n)
    elapsed = time.perf_counter() - start
    ok = elapsed < 5.0
    report(
        "criterion 4: sorted-index oracle + comparison bound on 1e3 sequences",
        ok,
        f"{elapsed:.2f}s",
    )


def _request_sequences(n_sequences=100, universe=300, n_requests=24):
    rng = np.random.default_rng(505)
    sequences = []
    for _ in range(n_sequences):
        reqs = []
        for _ in range(n_requests):
            idx = []
            for _ in range(int(rng.integers(2, 5))):
                start = int(rng.integers(0, universe - 12))
                idx.extend(range(start, start + int(rng.integers(4, 11))))
            idx = list(dict.fromkeys(idx))
            rng.shuffle(idx)
            reqs.append(idx)
        sequences.append(reqs)
    return sequences


def _run_mode(mode, reqs):
    mem = DeviceMemory(1 << 20, 64, mode)
    total_bytes, total_tx = 0, 0
    for r in reqs:
        plan, layout = mem.build_plan([list(r)], now=0.0)
        total_bytes += plan.total_bytes
        total_tx += sum(layout.member_transactions())
        mem.release_batch([list(r)])
    return total_bytes, total_tx


@functools.cache
def _mode_results():
    """Shared evaluation: criteria 5 and 6 compare the exact same sequences."""
    sequences = _request_sequences()
    per_mode = {
        mode: [_run_mode(mode, reqs) for reqs in sequences] for mode in MemoryMode
    }
    return sequences, per_mode


def test_criterion_05_transfer_dominance():
    start = time.perf_counter()
    sequences, per_mode = _mode_results()
    for i, reqs in enumerate(sequences):
        b_red, _ = per_mode[MemoryMode.REDUNDANT][i]
        b_reuse, _ = per_mode[MemoryMode.REUSE][i]
        b_sorted, _ = per_mode[MemoryMode.REUSE_SORTED][i]
        assert b_reuse <= b_red
        assert b_sorted == b_reuse
        seen = set()
        repeats = False
        for r in reqs:
            for x in r:
                if x in seen:
                    repeats = True
                seen.add(x)
        if repeats:
            assert b_reuse < b_red
    elapsed = time.perf_counter() - start
    ok = elapsed < 1.0
    report("criterion 5: reuse bytes dominate redundant on 100 sequences", ok,
           f"{elapsed:.2f}s")


def test_criterion_06_coalescing_dominance():
    start = time.perf_counter()
    sequences, per_mode = _mode_results()
    for i, reqs in enumerate(sequences):
        _, tx_reuse = per_mode[MemoryMode.REUSE][i]
        _, tx_sorted = per_mode[MemoryMode.REUSE_SORTED][i]
        assert tx_sorted <= tx_reuse
        # redundant attains the minimum possible direct-access count
        _, tx_red = per_mode[MemoryMode.REDUNDANT][i]
        minimum = sum(math.ceil(len(r) / 16) for r in reqs)
        assert tx_red == minimum

    # exact hand-derived counts on the resident {2,5,7} / request {2,3,5,7,8} fixture
    fixture = {}
    for mode in MemoryMode:
        mem = DeviceMemory(1 << 16, 256, mode)
        if mode is not MemoryMode.REDUNDANT:
            mem.build_plan([[2, 5, 7]], now=0.0)
            mem.release_batch([[2, 5, 7]])
        _, layout = mem.build_plan([[2, 3, 5, 7, 8]], now=1.0)
        fixture[mode] = transaction_count(layout, 5)
    assert fixture[MemoryMode.REDUNDANT] == 1
    assert fixture[MemoryMode.REUSE] == 8
    assert fixture[MemoryMode.REUSE_SORTED] == 8
    elapsed = time.perf_counter() - start
    ok = elapsed < 1.0
    report(
        "criterion 6: sorted coalescing dominates, fixture counts 1/8/8",
        ok,
        f"{elapsed:.2f}s",
    )


def test_criterion_07_mode_ordering_reproduction():
    start = time.perf_counter()
    rows = {}
    for mode in ("redundant", "reuse", "reuse_sorted"):
        cfg = ExperimentConfig(workload="nbody", memory_mode=mode)
        _, row = run_single(cfg)
        rows[mode] = row
    transfer_ok = (
        rows["reuse"].total_transfer_time < rows["redundant"].total_transfer_time
        and rows["reuse_sorted"].total_transfer_time < rows["redundant"].total_transfer_time
    )
    kernel_ok = (
        rows["reuse"].total_kernel_time
        > rows["reuse_sorted"].total_kernel_time
        > rows["redundant"].total_kernel_time
    )
    total_ok = (
        rows["reuse_sorted"].makespan < rows["redundant"].makespan
        and rows["reuse_sorted"].makespan < rows["reuse"].makespan
    )
    elapsed = time.perf_counter() - start
    ok = transfer_ok and kernel_ok and total_ok and elapsed < 30.0
    report(
        "criterion 7: calibrated run reproduces the mode ordering",
        ok,
        "transfer {:.1f}/{:.1f}/{:.1f} kernel {:.1f}/{:.1f}/{:.1f} total {:.1f}/{:.1f}/{:.1f}".format(
            rows["redundant"].total_transfer_time,
            rows["reuse"].total_transfer_time,
            rows["reuse_sorted"].total_transfer_time,
            rows["redundant"].total_kernel_time,
            rows["reuse"].total_kernel_time,
            rows["reuse_sorted"].total_kernel_time,
            rows["redundant"].makespan,
            rows["reuse"].makespan,
            rows["reuse_sorted"].makespan,
        ),
    )


def test_criterion_08_adaptive_vs_static_combining():
    start = time.perf_counter()
    makespans = {}
    for agg in ("adaptive", "static_count"):
        cfg = ExperimentConfig(workload="nbody", aggregation=agg)
        _, row = run_single(cfg)
        makespans[agg] = row.makespan
    gap = (makespans["static_count"] - makespans["adaptive"]) / makespans["static_count"]
    elapsed = time.perf_counter() - start
    ok = (
        makespans["adaptive"] <= makespans["static_count"]
        and abs(gap - FROZEN_COMBINING_GAP) <= 0.01 * FROZEN_COMBINING_GAP
        and elapsed < 30.0
    )
    report(
        "criterion 8: adaptive combining beats flush-every-100 on frozen trace",
        ok,
        f"adaptive={makespans['adaptive']:.3f} static={makespans['static_count']:.3f} gap={gap:.4%}",
    )


def test_criterion_09_adaptive_vs_static_scheduling():
    start = time.perf_counter()
    results = {}
    partition_logs = {}
    for sched in ("adaptive", "static_count"):
        cfg = ExperimentConfig(workload="md", scheduler=sched)
        cfg.validate()
        workload = build_workload(cfg)
        cost = dataclasses.replace(cfg.cost, noise_seed=cfg.seed)
        tl = Timeline(cfg.device(), cfg.kernel_specs(workload.kernel_classes()), cost,
                      cfg.policy_params())
        workload.setup(tl)
        slog = tl.run()
        results[sched] = summarize(cfg.config_id(), slog)
        partition_logs[sched] = tl.partition_log
    balance_ok = all(
        (p["n_cpu"] == 0 and p["target"] <= 0.0)
        or abs(p["cpu_items"] - p["target"]) < p["crossing_items"]
        for p in partition_logs["adaptive"]
    )
    makespan_ok = results["adaptive"].makespan <= results["static_count"].makespan
    elapsed = time.perf_counter() - start
    ok = balance_ok and makespan_ok and len(partition_logs["adaptive"]) > 0 and elapsed < 30.0
    report(
        "criterion 9: adaptive queue split beats count split under load skew",
        ok,
        f"adaptive={results['adaptive'].makespan:.3f} static={results['static_count'].makespan:.3f} "
        f"partitions={len(partition_logs['adaptive'])}",
    )


def test_criterion_10_force_correctness():
    start = time.perf_counter()
    # exact expansion at theta = 0
    ps = nb.gen_particles(512, seed=42, clustering=0.6)
    tree = nb.build_bucket_tree(ps, 8)
    lists = nb.build_interaction_lists(tree, 0.0, ps)
    approx = nb.eval_forces(tree, lists, ps)
    exact = nb.direct_force_oracle(ps)
    scale = np.maximum(np.linalg.norm(exact, axis=1), 1e-30)
    err0 = (np.linalg.norm(approx - exact, axis=1) / scale).max()

    # frozen median threshold at theta = 0.5 on 2048 clustered particles
    ps2 = nb.gen_particles(2048, seed=42, clustering=0.6)
    tree2 = nb.build_bucket_tree(ps2, 8)
    lists2 = nb.build_interaction_lists(tree2, 0.5, ps2)
    approx2 = nb.eval_forces(tree2, lists2, ps2)
    exact2 = nb.direct_force_oracle(ps2)
    scale2 = np.maximum(np.linalg.norm(exact2, axis=1), 1e-30)
    median05 = float(np.median(np.linalg.norm(approx2 - exact2, axis=1) / scale2))
    elapsed = time.perf_counter() - start
    ok = err0 <= 1e-9 and median05 <= FROZEN_THETA05_MEDIAN_LIMIT and elapsed < 30.0
    report(
        "criterion 10: tree forces match the direct oracle",
        ok,
        f"theta0 max={err0:.2e} theta0.5 median={median05:.2e} (limit {FROZEN_THETA05_MEDIAN_LIMIT:.1e}) {elapsed:.1f}s",
    )


def test_criterion_11_determinism(tmp_path):
    cfg = ExperimentConfig(workload="nbody")
    cfg.nbody.particles = 1024
    log_a, row_a = run_single(cfg)
    log_b, row_b = run_single(cfg)
    logs_ok = log_a.serialize() == log_b.serialize()

    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results(run_experiment(cfg, None), out_a)
    write_results(run_experiment(cfg, None), out_b)
    csv_ok = out_a.read_bytes() == out_b.read_bytes()
    ok = logs_ok and csv_ok
    report(
        "criterion 11: identical config+seed gives byte-identical outputs",
        ok,
        f"log_bytes={len(log_a.serialize())} csv_bytes={len(out_a.read_bytes())}",
    )
