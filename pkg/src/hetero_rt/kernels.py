"""Hot numeric inner loops with numba acceleration and a pure-numpy fallback.

Every public function here has two implementations: an ``@njit`` version and a
vectorized numpy version.  Which one is bound at import time is controlled by
the ``HETERO_RT_PURE_NUMPY`` environment variable (set to ``1`` to force the
numpy path) and by whether numba imports at all.  Both paths compute identical
values; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import math
import os

import numpy as np

_PURE_NUMPY = os.environ.get("HETERO_RT_PURE_NUMPY", "").strip() not in ("", "0")

if not _PURE_NUMPY:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None
else:
    numba = None

NUMBA_ENABLED = numba is not None


def _njit(fn):
    if numba is None:
        return None
    return numba.njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# pairwise gravity (direct summation oracle)
# ---------------------------------------------------------------------------

def _direct_forces_loop(pos, mass, g, eps):
    n, d = pos.shape
    out = np.zeros((n, d))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r2 = eps * eps
            for k in range(d):
                dx = pos[j, k] - pos[i, k]
                r2 += dx * dx
            inv = g * mass[i] * mass[j] / (r2 * math.sqrt(r2))
            for k in range(d):
                out[i, k] += (pos[j, k] - pos[i, k]) * inv
    return out


def _np_direct_forces(pos, mass, g, eps):
    delta = pos[None, :, :] - pos[:, None, :]  # (n, n, d), row i -> sources j
    r2 = (delta * delta).sum(axis=2) + eps * eps
    np.fill_diagonal(r2, 1.0)  # self term zeroed below
    inv = g * mass[None, :] * mass[:, None] / (r2 * np.sqrt(r2))
    np.fill_diagonal(inv, 0.0)
    return (delta * inv[:, :, None]).sum(axis=1)


# ---------------------------------------------------------------------------
# bucket force evaluation pieces
# ---------------------------------------------------------------------------

def _forces_from_points_loop(ppos, pmass, spos, smass, g, eps):
    n, d = ppos.shape
    m = spos.shape[0]
    out = np.zeros((n, d))
    for i in range(n):
        for j in range(m):
            r2 = eps * eps
            same = True
            for k in range(d):
                dx = spos[j, k] - ppos[i, k]
                r2 += dx * dx
                if dx != 0.0:
                    same = False
            if same:
                continue  # coincident source (the particle itself)
            inv = g * pmass[i] * smass[j] / (r2 * math.sqrt(r2))
            for k in range(d):
                out[i, k] += (spos[j, k] - ppos[i, k]) * inv
    return out


def _np_forces_from_points(ppos, pmass, spos, smass, g, eps):
    delta = spos[None, :, :] - ppos[:, None, :]  # (n, m, d)
    r2 = (delta * delta).sum(axis=2) + eps * eps
    same = np.all(delta == 0.0, axis=2)
    r2 = np.where(same, 1.0, r2)
    inv = g * pmass[:, None] * smass[None, :] / (r2 * np.sqrt(r2))
    inv = np.where(same, 0.0, inv)
    return (delta * inv[:, :, None]).sum(axis=1)


# ---------------------------------------------------------------------------
# short-range MD pair forces (soft linear repulsion inside the cutoff)
# ---------------------------------------------------------------------------

def _md_cross_forces_loop(pos_a, pos_b, cutoff, stiffness):
    na, d = pos_a.shape
    nb = pos_b.shape[0]
    fa = np.zeros((na, d))
    fb = np.zeros((nb, d))
    c2 = cutoff * cutoff
    for i in range(na):
        for j in range(nb):
            r2 = 0.0
            for k in range(d):
                dx = pos_a[i, k] - pos_b[j, k]
                r2 += dx * dx
            if r2 >= c2 or r2 < 1e-12:
                continue
            r = math.sqrt(r2)
            mag = stiffness * (cutoff - r) / r
            for k in range(d):
                f = (pos_a[i, k] - pos_b[j, k]) * mag
                fa[i, k] += f
                fb[j, k] -= f
    return fa, fb


def _np_md_cross_forces(pos_a, pos_b, cutoff, stiffness):
    delta = pos_a[:, None, :] - pos_b[None, :, :]
    r2 = (delta * delta).sum(axis=2)
    r = np.sqrt(np.where(r2 < 1e-12, 1.0, r2))
    active = (r2 < cutoff * cutoff) & (r2 >= 1e-12)
    mag = np.where(active, stiffness * (cutoff - r) / r, 0.0)
    pair = delta * mag[:, :, None]
    return pair.sum(axis=1), -pair.sum(axis=0)


def _md_self_forces_loop(pos, cutoff, stiffness):
    n, d = pos.shape
    out = np.zeros((n, d))
    c2 = cutoff * cutoff
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for k in range(d):
                dx = pos[i, k] - pos[j, k]
                r2 += dx * dx
            if r2 >= c2 or r2 < 1e-12:
                continue
            r = math.sqrt(r2)
            mag = stiffness * (cutoff - r) / r
            for k in range(d):
                f = (pos[i, k] - pos[j, k]) * mag
                out[i, k] += f
                out[j, k] -= f
    return out


def _np_md_self_forces(pos, cutoff, stiffness):
    fa, _ = _np_md_cross_forces(pos, pos, cutoff, stiffness)
    return fa  # i==j pairs fall under the r2 < 1e-12 guard


# ---------------------------------------------------------------------------
# half-warp memory transaction counting
# ---------------------------------------------------------------------------

def _count_address_runs_loop(addresses, group):
    n = addresses.shape[0]
    total = 0
    for start in range(0, n, group):
        stop = min(start + group, n)
        total += 1
        for i in range(start + 1, stop):
            if addresses[i] != addresses[i - 1] + 1:
                total += 1
    return total


def _np_count_address_runs(addresses, group):
    n = addresses.shape[0]
    if n == 0:
        return 0
    groups = (n + group - 1) // group
    if n == 1:
        return groups
    breaks = addresses[1:] != addresses[:-1] + 1
    inner = np.ones(n - 1, dtype=bool)
    inner[group - 1 :: group] = False  # group boundaries start a fresh run anyway
    return int(groups + np.count_nonzero(breaks & inner))


_nb_direct_forces = _njit(_direct_forces_loop)
_nb_forces_from_points = _njit(_forces_from_points_loop)
_nb_md_cross_forces = _njit(_md_cross_forces_loop)
_nb_md_self_forces = _njit(_md_self_forces_loop)
_nb_count_address_runs = _njit(_count_address_runs_loop)

if NUMBA_ENABLED:
    direct_forces = _nb_direct_forces
    forces_from_points = _nb_forces_from_points
    md_cross_forces = _nb_md_cross_forces
    md_self_forces = _nb_md_self_forces
    _count_runs = _nb_count_address_runs
else:
    direct_forces = _np_direct_forces
    forces_from_points = _np_forces_from_points
    md_cross_forces = _np_md_cross_forces
    md_self_forces = _np_md_self_forces
    _count_runs = _np_count_address_runs


def count_address_runs(addresses: np.ndarray, group: int = 16) -> int:
    """Number of maximal consecutive-address runs, per `group`-sized chunk."""
    addresses = np.ascontiguousarray(addresses, dtype=np.int64)
    return int(_count_runs(addresses, group))
