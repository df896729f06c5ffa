import math

import numpy as np
import pytest

from hetero_rt.devicesim import (
    CostParams,
    DEVICE_PRESETS,
    KERNEL_PRESETS,
    DeviceSpec,
    KernelSpec,
    calc_occupancy,
    occupancy_oracle,
    sim_cpu_time,
    sim_kernel_time,
    sim_transfer_time,
    wave_count,
)
from hetero_rt.errors import KernelFitError

KEPLER = DEVICE_PRESETS["kepler-k20"]


def test_force_preset_occupancy():
    blocks, occ = calc_occupancy(KERNEL_PRESETS["force"], KEPLER)
    assert blocks == 8
    assert occ == 0.50


def test_ewald_preset_occupancy():
    blocks, occ = calc_occupancy(KERNEL_PRESETS["ewald"], KEPLER)
    assert blocks == 5
    assert occ == pytest.approx(0.3125)


def test_impossible_shared_memory():
    k = KernelSpec("big", 128, 32, KEPLER.shared_mem_per_sm + 1, 1.0)
    with pytest.raises(KernelFitError):
        calc_occupancy(k, KEPLER)


def test_tiny_blocks_hit_block_limit():
    k = KernelSpec("tiny", 1, 1, 1, 1.0)
    blocks, _ = calc_occupancy(k, KEPLER)
    assert blocks == KEPLER.max_blocks_per_sm


def _random_pair(rng):
    d = DeviceSpec(
        sm_count=int(rng.integers(1, 32)),
        max_threads_per_sm=int(rng.integers(128, 4096)),
        max_blocks_per_sm=int(rng.integers(1, 33)),
        registers_per_sm=int(rng.integers(1 << 12, 1 << 17)),
        shared_mem_per_sm=int(rng.integers(1 << 12, 1 << 17)),
    )
    k = KernelSpec(
        kernel_class="r",
        threads_per_block=int(rng.integers(1, 1025)),
        registers_per_thread=int(rng.integers(1, 256)),
        shared_mem_per_block=int(rng.integers(1, 1 << 15)),
        compute_per_item=1.0,
    )
    return k, d


def test_occupancy_matches_bruteforce_oracle():
    rng = np.random.default_rng(123)
    for _ in range(2000):
        k, d = _random_pair(rng)
        expected = occupancy_oracle(k, d)
        if expected == 0:
            with pytest.raises(KernelFitError):
                calc_occupancy(k, d)
        else:
            blocks, occ = calc_occupancy(k, d)
            assert blocks == expected
            assert occ == pytest.approx(blocks * k.threads_per_block / d.max_threads_per_sm)


def test_kernel_time_single_block():
    k = KERNEL_PRESETS["force"]
    p = CostParams(launch_overhead=0.5, mem_transaction_cost=2.0)
    t = sim_kernel_time([16], [1], k, KEPLER, p)
    assert t == pytest.approx(0.5 + 16 * k.compute_per_item + 2.0)


def test_kernel_time_indirect_strided_block():
    # 16 strided accesses, doubled by the address table: 32 transaction cost units
    k = KERNEL_PRESETS["force"]
    p = CostParams(launch_overhead=0.0, mem_transaction_cost=1.0)
    t = sim_kernel_time([16], [32], k, KEPLER, p)
    assert t == pytest.approx(16 * k.compute_per_item + 32.0)


def test_wave_count_208_blocks_is_two():
    assert wave_count(208, KERNEL_PRESETS["force"], KEPLER) == 2
    assert wave_count(104, KERNEL_PRESETS["force"], KEPLER) == 1


def test_kernel_time_two_waves_sums_maxima():
    k = KERNEL_PRESETS["force"]
    p = CostParams(launch_overhead=1.0, mem_transaction_cost=0.0)
    items = [10] * 104 + [50] * 104
    tx = [0] * 208
    t = sim_kernel_time(items, tx, k, KEPLER, p)
    assert t == pytest.approx(1.0 + 10 * k.compute_per_item + 50 * k.compute_per_item)


def test_transfer_time():
    p = CostParams(transfer_latency=10.0, transfer_bandwidth=100.0)
    assert sim_transfer_time(0, 0, p) == 0.0
    assert sim_transfer_time(1000, 0, p) == pytest.approx(20.0)
    assert sim_transfer_time(900, 100, p) == pytest.approx(20.0)


def test_cpu_time_linear_and_deterministic():
    p = CostParams(cpu_time_per_item_true=2.0)
    assert sim_cpu_time([], p) == 0.0
    assert sim_cpu_time([40, 60], p) == pytest.approx(200.0)
    noisy = CostParams(cpu_time_per_item_true=2.0, cpu_noise=0.3, noise_seed=5)
    a = sim_cpu_time([40, 60], noisy, np.random.default_rng(noisy.noise_seed))
    b = sim_cpu_time([40, 60], noisy, np.random.default_rng(noisy.noise_seed))
    assert a == b
    assert abs(a - 200.0) <= 60.0 + 1e-9
