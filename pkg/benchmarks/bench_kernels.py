#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The same functions run under both paths (results are checked to agree), so
the table shows exactly what HETERO_RT_PURE_NUMPY=1 costs.
"""

import argparse
import time

import numpy as np

from hetero_rt import kernels as kn


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kn.NUMBA_ENABLED:
        print("numba path is disabled (HETERO_RT_PURE_NUMPY set or numba missing);")
        print("only the numpy timings below are meaningful.")

    rng = np.random.default_rng(1)
    n = 2048
    pos = rng.uniform(0, 1, size=(n, 2))
    mass = rng.uniform(0.5, 1.5, size=n)
    ppos = rng.uniform(0, 1, size=(128, 2))
    pmass = rng.uniform(0.5, 1.5, size=128)
    spos = rng.uniform(0, 1, size=(4096, 2))
    smass = rng.uniform(0.5, 1.5, size=4096)
    md_a = rng.uniform(0, 2, size=(512, 2))
    md_b = rng.uniform(0, 2, size=(512, 2))
    addr = rng.integers(0, 5000, size=100_000).astype(np.int64)

    cases = [
        ("direct_forces (n=2048)", kn._nb_direct_forces, kn._np_direct_forces,
         (pos, mass, 1.0, 1e-4)),
        ("forces_from_points (128x4096)", kn._nb_forces_from_points,
         kn._np_forces_from_points, (ppos, pmass, spos, smass, 1.0, 1e-4)),
        ("md_cross_forces (512x512)", kn._nb_md_cross_forces,
         kn._np_md_cross_forces, (md_a, md_b, 1.0, 25.0)),
        ("md_self_forces (512)", kn._nb_md_self_forces, kn._np_md_self_forces,
         (md_a, 1.0, 25.0)),
        ("count_address_runs (1e5)", kn._nb_count_address_runs,
         kn._np_count_address_runs, (addr, 16)),
    ]

    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, nb_fn, np_fn, call_args in cases:
        t_np = best_of(np_fn, call_args, args.repeat)
        if nb_fn is None:
            print(f"{name:34s} {t_np * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")
            continue
        got_nb, got_np = nb_fn(*call_args), np_fn(*call_args)
        if isinstance(got_nb, tuple):
            for a, b in zip(got_nb, got_np):
                np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
        elif isinstance(got_nb, np.ndarray):
            np.testing.assert_allclose(got_nb, got_np, rtol=1e-10, atol=1e-12)
        else:
            assert got_nb == got_np, (name, got_nb, got_np)
        t_nb = best_of(nb_fn, call_args, args.repeat)
        print(f"{name:34s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
