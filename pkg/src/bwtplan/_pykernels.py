"""Pure-Python voxel traversal kernels.

This is the reference implementation and the fallback used when the compiled
``_kernels`` extension is not available. Every arithmetic step is written in
the same order as the Cython twin so both backends return identical results
on IEEE doubles.

Grid conventions: arrays are indexed ``[i, j, k]`` along x, y, z; voxel
``(i, j, k)`` spans ``origin + [i, i+1] * r`` per axis. States are
``0 = unknown``, ``1 = free``, ``2 = occupied``.
"""
from math import atan2, cos, floor, inf, isfinite, sin, sqrt

import numpy as np

UNKNOWN = 0
FREE = 1
OCCUPIED = 2


class _Walker:
    """Amanatides-Woo voxel walker; ``t`` is the entry distance (meters)."""

    __slots__ = ("i", "j", "k", "si", "sj", "sk", "tmi", "tmj", "tmk", "tdi", "tdj", "tdk", "t")

    def __init__(self, ox, oy, oz, dx, dy, dz, origin, r):
        self.i, self.si, self.tmi, self.tdi = _axis((ox - origin[0]) / r, dx, r)
        self.j, self.sj, self.tmj, self.tdj = _axis((oy - origin[1]) / r, dy, r)
        self.k, self.sk, self.tmk, self.tdk = _axis((oz - origin[2]) / r, dz, r)
        self.t = 0.0

    def next(self):
        if self.tmi <= self.tmj and self.tmi <= self.tmk:
            self.t = self.tmi
            self.i += self.si
            self.tmi += self.tdi
        elif self.tmj <= self.tmk:
            self.t = self.tmj
            self.j += self.sj
            self.tmj += self.tdj
        else:
            self.t = self.tmk
            self.k += self.sk
            self.tmk += self.tdk


def _axis(g, d, r):
    i = int(floor(g))
    if d > 0:
        return i, 1, (i + 1 - g) * r / d, r / d
    if d < 0:
        return i, -1, (i - g) * r / d, -r / d
    return i, 0, inf, inf


def _in_frustum(cx, cy, cz, ox, oy, oz, cyaw, syaw, half_h, half_v, full_h, max_range):
    vx = cx - ox
    vy = cy - oy
    vz = cz - oz
    if vx * vx + vy * vy + vz * vz > max_range * max_range:
        return False
    if not full_h:
        lx = cyaw * vx + syaw * vy
        ly = -syaw * vx + cyaw * vy
        if abs(atan2(ly, lx)) > half_h:
            return False
    hxy = sqrt(vx * vx + vy * vy)
    if abs(atan2(vz, hxy)) > half_v:
        return False
    return True


def trace_solid(solid, origin, r, o, dirs, max_range):
    """Entry distance of each ray into the first solid voxel, ``inf`` if none."""
    nx, ny, nz = solid.shape
    ox, oy, oz = float(o[0]), float(o[1]), float(o[2])
    out = np.full(len(dirs), inf)
    for n in range(len(dirs)):
        w = _Walker(ox, oy, oz, dirs[n, 0], dirs[n, 1], dirs[n, 2], origin, r)
        while True:
            if w.i < 0 or w.j < 0 or w.k < 0 or w.i >= nx or w.j >= ny or w.k >= nz:
                break
            if w.t > max_range:
                break
            if solid[w.i, w.j, w.k]:
                out[n] = w.t
                break
            w.next()
    return out


def integrate_rays(occ, origin, r, o, dirs, dists, max_range, nudge):
    """Mark ray terminals occupied, then carve free space along every ray.

    Returns ``(newly_free, newly_occupied, bbox)`` where ``bbox`` holds the
    index bounds ``[lo_i, lo_j, lo_k, hi_i, hi_j, hi_k]`` (inclusive) of the
    newly occupied voxels, or ``-1`` everywhere when there are none.
    """
    nx, ny, nz = occ.shape
    ox, oy, oz = float(o[0]), float(o[1]), float(o[2])
    n_free = 0
    n_occ = 0
    bbox = [-1, -1, -1, -1, -1, -1]
    for n in range(len(dirs)):
        d = dists[n]
        if isfinite(d) and d <= max_range:
            px = ox + (d + nudge) * dirs[n, 0]
            py = oy + (d + nudge) * dirs[n, 1]
            pz = oz + (d + nudge) * dirs[n, 2]
            i = int(floor((px - origin[0]) / r))
            j = int(floor((py - origin[1]) / r))
            k = int(floor((pz - origin[2]) / r))
            if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz and occ[i, j, k] != OCCUPIED:
                occ[i, j, k] = OCCUPIED
                n_occ += 1
                if bbox[0] < 0:
                    bbox = [i, j, k, i, j, k]
                else:
                    bbox = [min(bbox[0], i), min(bbox[1], j), min(bbox[2], k),
                            max(bbox[3], i), max(bbox[4], j), max(bbox[5], k)]
    for n in range(len(dirs)):
        d = dists[n]
        limit = d if (isfinite(d) and d <= max_range) else max_range
        w = _Walker(ox, oy, oz, dirs[n, 0], dirs[n, 1], dirs[n, 2], origin, r)
        while 0 <= w.i < nx and 0 <= w.j < ny and 0 <= w.k < nz and w.t < limit:
            if occ[w.i, w.j, w.k] == UNKNOWN:
                occ[w.i, w.j, w.k] = FREE
                n_free += 1
            w.next()
    return n_free, n_occ, np.array(bbox, dtype=np.int64)


def gain_rays(occ, origin, r, o, dirs, max_range, yaw, half_h, half_v, full_h, clip, visited, count_state):
    """Count distinct voxels in ``count_state`` hit by the rays.

    Rays stop at the first occupied voxel, at ``max_range``, or on leaving the
    ``clip`` index box ``[lo_i, lo_j, lo_k, hi_i, hi_j, hi_k)``. A voxel counts
    only if its center lies in the frustum. ``visited`` is scratch space of the
    grid's shape, zero on entry.
    """
    nx, ny, nz = occ.shape
    ox, oy, oz = float(o[0]), float(o[1]), float(o[2])
    cyaw = cos(yaw)
    syaw = sin(yaw)
    lo_i, lo_j, lo_k, hi_i, hi_j, hi_k = (int(c) for c in clip)
    lo_i, lo_j, lo_k = max(lo_i, 0), max(lo_j, 0), max(lo_k, 0)
    hi_i, hi_j, hi_k = min(hi_i, nx), min(hi_j, ny), min(hi_k, nz)
    count = 0
    for n in range(len(dirs)):
        w = _Walker(ox, oy, oz, dirs[n, 0], dirs[n, 1], dirs[n, 2], origin, r)
        while w.t < max_range:
            i, j, k = w.i, w.j, w.k
            if i < lo_i or j < lo_j or k < lo_k or i >= hi_i or j >= hi_j or k >= hi_k:
                break
            s = occ[i, j, k]
            if s == OCCUPIED:
                break
            if s == count_state and visited[i, j, k] == 0:
                cx = origin[0] + (i + 0.5) * r
                cy = origin[1] + (j + 0.5) * r
                cz = origin[2] + (k + 0.5) * r
                if _in_frustum(cx, cy, cz, ox, oy, oz, cyaw, syaw, half_h, half_v, full_h, max_range):
                    visited[i, j, k] = 1
                    count += 1
                else:
                    visited[i, j, k] = 2
            w.next()
    return count


def visible_targets(occ, seen, origin, r, o, yaw, half_h, half_v, full_h, max_range, clip,
                    unseen_only, block_unknown):
    """Occupied voxels visible from ``o``.

    A target is visible when its center is inside the frustum and range, and
    the segment from ``o`` to the closest point of the target's cube crosses
    no blocking voxel (occupied, or unknown when ``block_unknown``). The voxel
    containing ``o`` is never treated as blocking.

    Returns ``(flat_indices, center_distances)`` in C order.
    """
    nx, ny, nz = occ.shape
    ox, oy, oz = float(o[0]), float(o[1]), float(o[2])
    cyaw = cos(yaw)
    syaw = sin(yaw)
    lo_i = max(int(clip[0]), 0, int(floor((ox - max_range - origin[0]) / r)))
    lo_j = max(int(clip[1]), 0, int(floor((oy - max_range - origin[1]) / r)))
    lo_k = max(int(clip[2]), 0, int(floor((oz - max_range - origin[2]) / r)))
    hi_i = min(int(clip[3]), nx, int(floor((ox + max_range - origin[0]) / r)) + 1)
    hi_j = min(int(clip[4]), ny, int(floor((oy + max_range - origin[1]) / r)) + 1)
    hi_k = min(int(clip[5]), nz, int(floor((oz + max_range - origin[2]) / r)) + 1)
    eps = 1e-7 * r
    idx_out = []
    dist_out = []
    for i in range(lo_i, hi_i):
        for j in range(lo_j, hi_j):
            for k in range(lo_k, hi_k):
                if occ[i, j, k] != OCCUPIED:
                    continue
                if unseen_only and seen[i, j, k]:
                    continue
                cx = origin[0] + (i + 0.5) * r
                cy = origin[1] + (j + 0.5) * r
                cz = origin[2] + (k + 0.5) * r
                if not _in_frustum(cx, cy, cz, ox, oy, oz, cyaw, syaw, half_h, half_v, full_h, max_range):
                    continue
                qx = min(max(ox, origin[0] + i * r), origin[0] + (i + 1) * r)
                qy = min(max(oy, origin[1] + j * r), origin[1] + (j + 1) * r)
                qz = min(max(oz, origin[2] + k * r), origin[2] + (k + 1) * r)
                vx = qx - ox
                vy = qy - oy
                vz = qz - oz
                length = sqrt(vx * vx + vy * vy + vz * vz)
                visible = True
                if length > 0.0:
                    w = _Walker(ox, oy, oz, vx / length, vy / length, vz / length, origin, r)
                    limit = length - eps
                    w.next()
                    while w.t < limit:
                        wi, wj, wk = w.i, w.j, w.k
                        if wi < 0 or wj < 0 or wk < 0 or wi >= nx or wj >= ny or wk >= nz:
                            break
                        if wi == i and wj == j and wk == k:
                            break
                        s = occ[wi, wj, wk]
                        if s == OCCUPIED or (block_unknown and s == UNKNOWN):
                            visible = False
                            break
                        w.next()
                if visible:
                    ex = cx - ox
                    ey = cy - oy
                    ez = cz - oz
                    idx_out.append((i * ny + j) * nz + k)
                    dist_out.append(sqrt(ex * ex + ey * ey + ez * ez))
    return np.array(idx_out, dtype=np.int64), np.array(dist_out, dtype=np.float64)
