"""Independent brute-force reference implementations used by the tests.

None of these call into the package's algorithms; they only share the grid
conventions (voxel (i, j, k) spans origin + [i, i+1] * r per axis).
"""
import itertools
import math

import numpy as np


# -- voxel grids ----------------------------------------------------------------

def voxel_of(p, origin, r):
    return tuple(int(v) for v in np.floor((np.asarray(p, float) - origin) / r))


def march_ray(o, hit, origin, r, shape, step_frac=0.1):
    """Voxels sampled along o -> hit at steps of ``step_frac * r`` (hit excluded)."""
    o = np.asarray(o, float)
    hit = np.asarray(hit, float)
    length = np.linalg.norm(hit - o)
    n = int(length / (step_frac * r))
    out = set()
    for k in range(n):
        p = o + (hit - o) * (k * step_frac * r / length)
        v = voxel_of(p, origin, r)
        if all(0 <= v[a] < shape[a] for a in range(3)):
            out.add(v)
    return out


def nearest_occupied(occupied_idx, origin, r, p):
    """Exact distance from ``p`` to the nearest occupied voxel centre."""
    centers = origin + (np.asarray(occupied_idx, float) + 0.5) * r
    d = np.linalg.norm(centers - np.asarray(p, float), axis=1)
    return float(d.min())


def _segment_hits_open_boxes(o, q, lo, hi):
    """For each box (rows of lo/hi), does the segment o->q cross its interior?"""
    d = q - o
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tmin = np.where(d == 0, np.where((o > lo) & (o < hi), -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(d == 0, np.where((o > lo) & (o < hi), np.inf, -np.inf), np.maximum(t1, t2))
    enter = np.maximum(tmin.max(axis=1), 0.0)
    leave = np.minimum(tmax.min(axis=1), 1.0)
    return leave - enter > 1e-9


def in_frustum(center, o, yaw, fov_h, fov_v, max_range):
    v = np.asarray(center, float) - o
    if np.linalg.norm(v) > max_range:
        return False
    if fov_h < 360:
        rel = math.atan2(v[1], v[0]) - yaw
        rel = math.atan2(math.sin(rel), math.cos(rel))
        if abs(rel) > math.radians(fov_h) / 2:
            return False
    return abs(math.atan2(v[2], math.hypot(v[0], v[1]))) <= math.radians(fov_v) / 2


def visible_voxels(targets, blocking, origin, r, o, yaw, fov_h, fov_v, max_range, to_closest_point=True):
    """Indices of ``targets`` (bool grid) whose centre is in the frustum and whose
    line of sight from ``o`` crosses the interior of no ``blocking`` voxel.

    The sight line ends at the closest point of the target cube (or at its centre
    when ``to_closest_point`` is false). The voxel containing ``o`` and the
    target itself never block.
    """
    o = np.asarray(o, float)
    own = voxel_of(o, origin, r)
    blockers = np.argwhere(blocking)
    if len(blockers):
        blockers = blockers[~np.all(blockers == own, axis=1)]
    blo = origin + blockers * r
    bhi = blo + r
    out = set()
    for idx in np.argwhere(targets):
        idx = tuple(int(v) for v in idx)
        c = origin + (np.array(idx) + 0.5) * r
        if not in_frustum(c, o, yaw, fov_h, fov_v, max_range):
            continue
        lo = origin + np.array(idx) * r
        q = np.clip(o, lo, lo + r) if to_closest_point else c
        if len(blockers) == 0 or np.linalg.norm(q - o) == 0:
            out.add(idx)
            continue
        mask = ~np.all(blockers == idx, axis=1)
        if not _segment_hits_open_boxes(o, q, blo[mask], bhi[mask]).any():
            out.add(idx)
    return out


# -- graphs ---------------------------------------------------------------------

def all_simple_path_distances(n, edges, source):
    """Shortest distance to each vertex by enumerating every simple path from ``source``."""
    adj = {v: [] for v in range(n)}
    for a, b, w in edges:
        adj[a].append((b, w))
        adj[b].append((a, w))
    best = [math.inf] * n
    best[source] = 0.0
    stack = [(source, 0.0, frozenset([source]))]
    while stack:
        v, d, used = stack.pop()
        for w, length in adj[v]:
            if w in used:
                continue
            nd = d + length
            if nd < best[w]:
                best[w] = nd
            stack.append((w, nd, used | {w}))
    return best


# -- combinatorics --------------------------------------------------------------

def brute_greedy(sets, min_gain):
    """Greedy set cover on explicit Python-int bitsets.

    Picks the set with the most uncovered elements, lowest index on ties, while
    that count exceeds ``min_gain``.
    """
    bits = [sum(1 << j for j, x in enumerate(row) if x) for row in sets]
    covered = 0
    left = list(range(len(bits)))
    order = []
    while left:
        gains = [bin(bits[k] & ~covered).count("1") for k in left]
        g = max(gains)
        if g <= min_gain:
            break
        k = left[gains.index(g)]
        order.append(k)
        covered |= bits[k]
        left.remove(k)
    return order


def brute_open_tour(cost, start=0):
    """Minimum cost of a path that starts at ``start`` and visits every vertex once."""
    n = len(cost)
    others = [v for v in range(n) if v != start]
    best = math.inf
    best_order = None
    for perm in itertools.permutations(others):
        order = (start,) + perm
        c = sum(cost[a][b] for a, b in zip(order, order[1:]))
        if c < best:
            best, best_order = c, order
    return best, list(best_order)
