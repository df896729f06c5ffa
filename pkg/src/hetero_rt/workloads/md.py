"""2D patch-decomposed molecular dynamics workload.

Space is a grid of patches; a compute object handles force calculation for
one pair of neighboring patches (self pairs included) and fires once both
patches' data messages have arrived.  After each step, particles migrate to
the patch covering their new position, so per-patch populations drift and the
pair work requests become increasingly uneven, which is the load skew the
adaptive scheduler exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..runtime import Message

# half neighborhood: each unordered 8-neighbor pair appears exactly once
_NEIGHBOR_STEPS = ((0, 1), (1, -1), (1, 0), (1, 1))


@dataclass
class PatchGrid:
    rows: int
    cols: int
    patch_size: float
    cutoff: float
    positions: np.ndarray  # (n, 2)
    velocities: np.ndarray  # (n, 2)
    patch_of: np.ndarray  # (n,) linear patch index

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    @property
    def box(self) -> tuple[float, float]:
        return self.rows * self.patch_size, self.cols * self.patch_size

    def populations(self) -> np.ndarray:
        return np.bincount(self.patch_of, minlength=self.n_patches)

    def particles_in(self, patch: int) -> np.ndarray:
        return np.nonzero(self.patch_of == patch)[0]


def neighbor_pairs(rows: int, cols: int, periodic: bool = False) -> list[tuple[int, int]]:
    """Self pairs plus each touching patch pair once.

    With `periodic`, neighborhoods wrap around the grid edges; a pair is still
    listed once even when patches touch through more than one boundary image.
    """
    pairs = []
    seen = set()
    for r in range(rows):
        for c in range(cols):
            p = r * cols + c
            pairs.append((p, p))
            seen.add((p, p))
            for dr, dc in _NEIGHBOR_STEPS:
                rr, cc = r + dr, c + dc
                if periodic:
                    rr, cc = rr % rows, cc % cols
                elif not (0 <= rr < rows and 0 <= cc < cols):
                    continue
                q = rr * cols + cc
                key = (min(p, q), max(p, q))
                if key not in seen:
                    seen.add(key)
                    pairs.append((p, q))
    return pairs


def gen_md_system(
    grid_dim: tuple[int, int],
    particles_per_patch: int,
    cutoff: float,
    seed: int,
    patch_size: float | None = None,
) -> tuple[PatchGrid, list[tuple[int, int, int]]]:
    """Build the initial grid and enumerate compute pairs.

    Returns the grid plus (patch_a, patch_b, item_count) descriptors, where
    item_count is the population product and zero-work pairs are dropped.
    """
    rows, cols = grid_dim
    patch_size = cutoff if patch_size is None else patch_size
    if patch_size < cutoff:
        raise ValueError("patch size must cover the cutoff distance")
    rng = np.random.default_rng(seed)
    n = rows * cols * particles_per_patch
    pr = rng.integers(0, rows, size=n)
    pc = rng.integers(0, cols, size=n)
    offsets = rng.uniform(0.0, patch_size, size=(n, 2))
    positions = np.column_stack([pr * patch_size, pc * patch_size]) + offsets
    velocities = rng.normal(0.0, 0.35 * patch_size, size=(n, 2))
    grid = PatchGrid(
        rows=rows,
        cols=cols,
        patch_size=patch_size,
        cutoff=cutoff,
        positions=positions,
        velocities=velocities,
        patch_of=(pr * cols + pc).astype(np.int64),
    )
    return grid, pair_work(grid)


def pair_work(grid: PatchGrid, periodic: bool = False) -> list[tuple[int, int, int]]:
    pops = grid.populations()
    out = []
    for a, b in neighbor_pairs(grid.rows, grid.cols, periodic):
        items = int(pops[a]) * int(pops[b])
        if items > 0:
            out.append((a, b, items))
    return out


def compute_forces(grid: PatchGrid, stiffness: float = 25.0, periodic: bool = False) -> np.ndarray:
    """Soft-repulsion forces from every neighboring patch pair.

    Under periodic boundaries, a neighbor reached through an edge is shifted
    by the box length (minimum image) before the pair kernel runs.
    """
    forces = np.zeros_like(grid.positions)
    index = [grid.particles_in(p) for p in range(grid.n_patches)]
    box = np.array(grid.box)
    for r in range(grid.rows):
        for c in range(grid.cols):
            p = r * grid.cols + c
            ia = index[p]
            if len(ia) == 0:
                continue
            pa = np.ascontiguousarray(grid.positions[ia])
            forces[ia] += kernels.md_self_forces(pa, grid.cutoff, stiffness)
            for dr, dc in _NEIGHBOR_STEPS:
                rr, cc = r + dr, c + dc
                shift = np.zeros(2)
                if periodic:
                    if rr == grid.rows:
                        rr = 0
                        shift[0] += box[0]
                    if cc == grid.cols:
                        cc = 0
                        shift[1] += box[1]
                    elif cc == -1:
                        cc = grid.cols - 1
                        shift[1] -= box[1]
                elif not (0 <= rr < grid.rows and 0 <= cc < grid.cols):
                    continue
                q = rr * grid.cols + cc
                if q == p:
                    continue  # 1-wide periodic grid: skip self images
                ib = index[q]
                if len(ib) == 0:
                    continue
                pb = np.ascontiguousarray(grid.positions[ib] + shift)
                fa, fb = kernels.md_cross_forces(pa, pb, grid.cutoff, stiffness)
                forces[ia] += fa
                forces[ib] += fb
    return forces


def md_step(grid: PatchGrid, dt: float, stiffness: float = 25.0, periodic: bool = False) -> PatchGrid:
    """Explicit Euler update, then patch reassignment.

    Walls are reflective by default; with `periodic` positions wrap instead.
    """
    forces = compute_forces(grid, stiffness, periodic)
    grid.velocities = grid.velocities + forces * dt  # unit masses
    pos = grid.positions + grid.velocities * dt
    hi = np.array(grid.box)
    if periodic:
        pos = pos % hi
    else:
        for k in range(2):
            below = pos[:, k] < 0.0
            pos[below, k] = -pos[below, k]
            grid.velocities[below, k] *= -1.0
            above = pos[:, k] > hi[k]
            pos[above, k] = 2.0 * hi[k] - pos[above, k]
            grid.velocities[above, k] *= -1.0
        pos = np.clip(pos, 0.0, hi - 1e-12)  # extreme velocities could overshoot twice
    grid.positions = pos
    r = np.minimum((pos[:, 0] // grid.patch_size).astype(np.int64), grid.rows - 1)
    c = np.minimum((pos[:, 1] // grid.patch_size).astype(np.int64), grid.cols - 1)
    grid.patch_of = r * grid.cols + c
    return grid


@dataclass
class MDParams:
    rows: int = 10
    cols: int = 10
    particles_per_patch: int = 24
    cutoff: float = 1.0
    steps: int = 12
    dt: float = 0.08
    stiffness: float = 25.0
    seed: int = 7
    ready_cost: float = 0.01  # per-particle delay before a patch's data message
    migrate_cost: float = 2.0  # gap between a step's last completion and the next
    bytes_per_item: int = 16
    periodic: bool = False  # wraparound boundaries instead of reflective walls


class MDWorkload:
    """Closed-loop MD run: step k+1's requests only arrive after step k ends."""

    kernel_class = "md"

    def __init__(self, params: MDParams):
        self.params = params
        self.grid, _ = gen_md_system(
            (params.rows, params.cols), params.particles_per_patch,
            params.cutoff, params.seed,
        )
        self.step = 0
        self._pair_chares: dict[tuple[int, int], int] = {}
        self._coordinator = None

    def kernel_classes(self) -> list[str]:
        return ["md"]

    def setup(self, tl) -> None:
        self._coordinator = tl.create_chare()
        for pair in neighbor_pairs(self.params.rows, self.params.cols, self.params.periodic):
            cid = tl.create_chare()
            self._pair_chares[pair] = cid
        self._begin_step(tl, 0.0)

    def _begin_step(self, tl, start_time: float) -> None:
        p = self.params
        pops = self.grid.populations()
        work = pair_work(self.grid, p.periodic)
        tl.runtime.set_entry(
            self._coordinator, "step_barrier", max(1, len(work)), self._on_barrier
        )
        ready = start_time + p.ready_cost * pops.astype(float)
        for a, b, items in work:
            pair = (a, b)
            cid = self._pair_chares[pair]
            inputs = 1 if a == b else 2
            tl.runtime.set_entry(cid, "interact", inputs, self._make_pair_hook(pair, items))
            tl.runtime.set_entry(cid, "work_done", 1, self._pair_done)
            tl.schedule_message(
                float(ready[a]), Message(target=cid, entry_method="interact")
            )
            if a != b:
                tl.schedule_message(
                    float(ready[b]), Message(target=cid, entry_method="interact")
                )

    def _make_pair_hook(self, pair: tuple[int, int], items: int):
        def hook(tl, msg):
            buffers = [pair[0]] if pair[0] == pair[1] else list(pair)
            tl.submit(msg.target, "md", buffers, items, self.params.bytes_per_item)

        return hook

    def _pair_done(self, tl, msg):
        tl.send_message(Message(target=self._coordinator, entry_method="step_barrier"))

    def _on_barrier(self, tl, msg):
        self.step += 1
        if self.step >= self.params.steps:
            return
        md_step(self.grid, self.params.dt, self.params.stiffness, self.params.periodic)
        self._begin_step(tl, tl.now + self.params.migrate_cost)
