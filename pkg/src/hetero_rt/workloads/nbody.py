"""Barnes-Hut N-body workload: particles, bucket tree, interaction lists.

Buckets are the leaves of a spatial bisection tree; every bucket becomes one
work request per force phase whose buffer indices are the tree nodes and
buckets its particles must integrate.  Node ids are assigned in level order
while interaction lists are emitted in depth-first walk order, so a request's
buffer sequence is genuinely irregular, which is what stresses the reuse and
coalescing machinery downstream.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import HeteroRtError
from ..runtime import Message

DEFAULT_SOFTENING = 1e-4


@dataclass
class ParticleSet:
    positions: np.ndarray  # (n, dim), all within [0, box)
    masses: np.ndarray  # (n,), positive
    velocities: np.ndarray  # (n, dim)
    box: float


def gen_particles(n: int, seed: int, clustering: float = 0.0, dim: int = 2, box: float = 1.0) -> ParticleSet:
    """Deterministic particle generator; clustering > 0 adds Plummer-like clumps."""
    if n < 1:
        raise ValueError("need at least one particle")
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, box, size=(n, dim))
    n_clustered = int(round(n * clustering))
    if n_clustered > 0:
        n_clumps = max(1, min(8, n_clustered))
        centers = rng.uniform(0.0, box, size=(n_clumps, dim))
        member = rng.integers(0, n_clumps, size=n_clustered)
        offsets = rng.normal(0.0, 0.02 * box, size=(n_clustered, dim))
        positions[:n_clustered] = (centers[member] + offsets) % box
    masses = rng.uniform(0.5, 1.5, size=n)
    velocities = np.zeros((n, dim))
    return ParticleSet(positions=positions, masses=masses, velocities=velocities, box=box)


@dataclass
class TreeNode:
    node_id: int  # buffer index, level-order
    center: np.ndarray
    half_size: float
    particle_idx: np.ndarray  # leaf particles; empty for internal nodes
    children: list = field(default_factory=list)
    mass: float = 0.0
    com: np.ndarray | None = None

    @property
    def is_bucket(self) -> bool:
        return not self.children

    @property
    def size(self) -> float:
        return 2.0 * self.half_size


class BucketTree:
    def __init__(self, root: TreeNode, nodes: list[TreeNode], buckets: list[TreeNode]):
        self.root = root
        self.nodes = nodes  # indexed by node_id
        self.buckets = buckets  # depth-first walk order


def build_bucket_tree(ps: ParticleSet, bucket_size: int) -> BucketTree:
    """Recursive spatial bisection until every leaf holds <= bucket_size particles."""
    if bucket_size < 1:
        raise ValueError("bucket_size must be >= 1")
    dim = ps.positions.shape[1]
    half = ps.box / 2.0
    root = TreeNode(
        node_id=0,
        center=np.full(dim, half),
        half_size=half,
        particle_idx=np.arange(len(ps.masses)),
    )
    nodes = [root]
    queue = deque([root])  # level-order expansion assigns ids breadth-first
    while queue:
        node = queue.popleft()
        if len(node.particle_idx) <= bucket_size or node.half_size < 1e-9:
            continue
        pos = ps.positions[node.particle_idx]
        quad = np.zeros(len(node.particle_idx), dtype=np.int64)
        for k in range(dim):
            quad |= (pos[:, k] >= node.center[k]).astype(np.int64) << k
        child_half = node.half_size / 2.0
        for q in range(1 << dim):
            mask = quad == q
            if not mask.any():
                continue
            offset = np.array([(1 if (q >> k) & 1 else -1) for k in range(dim)])
            child = TreeNode(
                node_id=len(nodes),
                center=node.center + offset * child_half,
                half_size=child_half,
                particle_idx=node.particle_idx[mask],
            )
            node.children.append(child)
            nodes.append(child)
            queue.append(child)
        node.particle_idx = np.empty(0, dtype=np.int64)

    _fill_mass(root, ps)
    buckets = []
    _collect_buckets(root, buckets)
    return BucketTree(root, nodes, buckets)


def _fill_mass(node: TreeNode, ps: ParticleSet) -> None:
    if node.is_bucket:
        m = ps.masses[node.particle_idx]
        node.mass = float(m.sum())
        node.com = (ps.positions[node.particle_idx] * m[:, None]).sum(axis=0) / node.mass
        return
    node.mass = 0.0
    com = np.zeros_like(node.center, dtype=float)
    for child in node.children:
        _fill_mass(child, ps)
        node.mass += child.mass
        com += child.com * child.mass
    node.com = com / node.mass


def _collect_buckets(node: TreeNode, out: list) -> None:
    if node.is_bucket:
        out.append(node)
        return
    for child in node.children:
        _collect_buckets(child, out)


@dataclass
class InteractionList:
    bucket_id: int  # buffer index of the bucket itself
    node_interactions: list[int]  # accepted far nodes (center-of-mass terms)
    particle_interactions: list[int]  # opened-to buckets (exact pairwise terms)
    walk_order: list[int]  # all referenced buffers in traversal order
    item_count: int  # interactions this bucket integrates


def _nearest_distance(bucket: TreeNode, point: np.ndarray) -> float:
    delta = np.abs(point - bucket.center) - bucket.half_size
    return float(np.linalg.norm(np.maximum(delta, 0.0)))


def build_interaction_lists(tree: BucketTree, theta: float, ps: ParticleSet) -> list[InteractionList]:
    """Standard opening-angle walk, one list per bucket in walk order.

    A node is accepted when size / distance < theta (distance measured to the
    nearest point of the target bucket's cell, so enclosing nodes always
    open); buckets that cannot be opened contribute exact particles.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    lists = []
    for bucket in tree.buckets:
        nodes: list[int] = []
        parts: list[int] = []
        order: list[int] = []
        stack = [tree.root]
        while stack:
            node = stack.pop()
            d = _nearest_distance(bucket, node.com)
            if d > 0.0 and node.size / d < theta:
                nodes.append(node.node_id)
                order.append(node.node_id)
                continue
            if node.is_bucket:
                parts.append(node.node_id)
                order.append(node.node_id)
                continue
            stack.extend(reversed(node.children))
        item_count = len(nodes) + sum(
            len(tree.nodes[b].particle_idx) for b in parts
        )
        lists.append(
            InteractionList(
                bucket_id=bucket.node_id,
                node_interactions=nodes,
                particle_interactions=parts,
                walk_order=order,
                item_count=item_count,
            )
        )
    return lists


def direct_force_oracle(ps: ParticleSet, g: float = 1.0, eps: float = DEFAULT_SOFTENING) -> np.ndarray:
    """Exact O(n^2) pairwise forces (the independent check for the tree path)."""
    if eps == 0.0:
        _, counts = np.unique(ps.positions, axis=0, return_counts=True)
        if (counts > 1).any():
            raise HeteroRtError("coincident particles with zero softening")
    return kernels.direct_forces(
        np.ascontiguousarray(ps.positions, dtype=np.float64),
        np.ascontiguousarray(ps.masses, dtype=np.float64),
        float(g),
        float(eps),
    )


def eval_forces(
    tree: BucketTree,
    lists: list[InteractionList],
    ps: ParticleSet,
    g: float = 1.0,
    eps: float = DEFAULT_SOFTENING,
) -> np.ndarray:
    """Forces implied by the interaction lists (tree-approximated path)."""
    n, dim = ps.positions.shape
    forces = np.zeros((n, dim))
    pos = np.ascontiguousarray(ps.positions, dtype=np.float64)
    mass = np.ascontiguousarray(ps.masses, dtype=np.float64)
    for il in lists:
        bucket = tree.nodes[il.bucket_id]
        idx = bucket.particle_idx
        ppos = np.ascontiguousarray(pos[idx])
        pmass = np.ascontiguousarray(mass[idx])
        acc = np.zeros((len(idx), dim))
        if il.node_interactions:
            npos = np.ascontiguousarray(
                np.array([tree.nodes[i].com for i in il.node_interactions])
            )
            nmass = np.ascontiguousarray(
                np.array([tree.nodes[i].mass for i in il.node_interactions])
            )
            acc += kernels.forces_from_points(ppos, pmass, npos, nmass, float(g), float(eps))
        if il.particle_interactions:
            src_idx = np.concatenate(
                [tree.nodes[b].particle_idx for b in il.particle_interactions]
            )
            spos = np.ascontiguousarray(pos[src_idx])
            smass = np.ascontiguousarray(mass[src_idx])
            acc += kernels.forces_from_points(ppos, pmass, spos, smass, float(g), float(eps))
        forces[idx] += acc
    return forces


@dataclass
class NBodyParams:
    particles: int = 4096
    bucket_size: int = 8
    theta: float = 0.5
    clustering: float = 0.6
    seed: int = 42
    dim: int = 2
    pieces: int = 16  # tree pieces; walk emission pauses between them
    emit_cost: float = 0.0001  # time per interaction found during the walk
    piece_gap: float = 4.0  # mean idle gap between tree pieces (burstiness)
    bytes_per_item: int = 48
    ewald: bool = False  # second kernel class, one request per bucket


class NBodyWorkload:
    """Drives one force phase through the message-driven runtime."""

    kernel_class = "force"

    def __init__(self, params: NBodyParams):
        self.params = params
        self.particles = gen_particles(
            params.particles, params.seed, params.clustering, params.dim
        )
        self.tree = build_bucket_tree(self.particles, params.bucket_size)
        self.lists = build_interaction_lists(self.tree, params.theta, self.particles)
        self.arrival_times = self._schedule()

    def kernel_classes(self) -> list[str]:
        return ["force", "ewald"] if self.params.ewald else ["force"]

    def _schedule(self) -> list[float]:
        """Walk-ordered arrival times: dense inside a piece, lulls between.

        Piece gaps are lognormal so lull lengths vary over the run; the
        occasional record-setting lull is what distinguishes arrival-aware
        flushing from fixed-count combining.
        """
        p = self.params
        rng = np.random.default_rng(p.seed + 1)
        per_piece = max(1, math.ceil(len(self.lists) / p.pieces))
        times = []
        t = 0.0
        for i, il in enumerate(self.lists):
            if i > 0 and i % per_piece == 0:
                t += p.piece_gap * float(rng.lognormal(mean=0.0, sigma=1.0))
            t += p.emit_cost * max(1, il.item_count)
            times.append(t)
        return times

    def setup(self, tl) -> None:
        for il, when in zip(self.lists, self.arrival_times):
            cid = tl.create_chare(
                {"walk_done": (1, self._make_hook(il))}
            )
            tl.schedule_message(when, Message(target=cid, entry_method="walk_done"))

    def _make_hook(self, il: InteractionList):
        def hook(tl, msg):
            tl.submit(
                msg.target, "force", il.walk_order, il.item_count,
                self.params.bytes_per_item,
            )
            if self.params.ewald:
                bucket = il.bucket_id
                tl.submit(
                    msg.target, "ewald", [bucket],
                    max(1, len(self.tree.nodes[bucket].particle_idx)),
                    self.params.bytes_per_item,
                )

        return hook
