# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled voxel traversal kernels.

Operation-for-operation twin of :mod:`bwtplan._pykernels`; see that module
for the contracts. Build with ``-ffp-contract=off`` so results match the
Python fallback bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, floor, isfinite, sin, sqrt, INFINITY
from libc.stdlib cimport free, malloc, realloc

cnp.import_array()

cdef enum:
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


cdef struct Walker:
    long i, j, k
    long si, sj, sk
    double tmi, tmj, tmk
    double tdi, tdj, tdk
    double t


cdef inline void _axis(double g, double d, double r, long* idx, long* step, double* tm, double* td) noexcept nogil:
    cdef long i = <long>floor(g)
    idx[0] = i
    if d > 0:
        step[0] = 1
        tm[0] = (i + 1 - g) * r / d
        td[0] = r / d
    elif d < 0:
        step[0] = -1
        tm[0] = (i - g) * r / d
        td[0] = -r / d
    else:
        step[0] = 0
        tm[0] = INFINITY
        td[0] = INFINITY


cdef inline void _init(Walker* w, double ox, double oy, double oz, double dx, double dy, double dz,
                       double* origin, double r) noexcept nogil:
    _axis((ox - origin[0]) / r, dx, r, &w.i, &w.si, &w.tmi, &w.tdi)
    _axis((oy - origin[1]) / r, dy, r, &w.j, &w.sj, &w.tmj, &w.tdj)
    _axis((oz - origin[2]) / r, dz, r, &w.k, &w.sk, &w.tmk, &w.tdk)
    w.t = 0.0


cdef inline void _next(Walker* w) noexcept nogil:
    if w.tmi <= w.tmj and w.tmi <= w.tmk:
        w.t = w.tmi
        w.i += w.si
        w.tmi += w.tdi
    elif w.tmj <= w.tmk:
        w.t = w.tmj
        w.j += w.sj
        w.tmj += w.tdj
    else:
        w.t = w.tmk
        w.k += w.sk
        w.tmk += w.tdk


cdef inline bint _in_frustum(double cx, double cy, double cz, double ox, double oy, double oz,
                             double cyaw, double syaw, double half_h, double half_v, bint full_h,
                             double max_range) noexcept nogil:
    cdef double vx = cx - ox
    cdef double vy = cy - oy
    cdef double vz = cz - oz
    cdef double lx, ly, hxy
    if vx * vx + vy * vy + vz * vz > max_range * max_range:
        return False
    if not full_h:
        lx = cyaw * vx + syaw * vy
        ly = -syaw * vx + cyaw * vy
        if fabs(atan2(ly, lx)) > half_h:
            return False
    hxy = sqrt(vx * vx + vy * vy)
    if fabs(atan2(vz, hxy)) > half_v:
        return False
    return True


def trace_solid(const unsigned char[:, :, ::1] solid, origin_in, double r, o, const double[:, ::1] dirs,
                double max_range):
    cdef Py_ssize_t nx = solid.shape[0], ny = solid.shape[1], nz = solid.shape[2]
    cdef double origin[3]
    origin[0] = origin_in[0]; origin[1] = origin_in[1]; origin[2] = origin_in[2]
    cdef double ox = o[0], oy = o[1], oz = o[2]
    cdef Py_ssize_t n, count = dirs.shape[0]
    out_arr = np.full(count, np.inf)
    cdef double[::1] out = out_arr
    cdef Walker w
    with nogil:
        for n in range(count):
            _init(&w, ox, oy, oz, dirs[n, 0], dirs[n, 1], dirs[n, 2], origin, r)
            while True:
                if w.i < 0 or w.j < 0 or w.k < 0 or w.i >= nx or w.j >= ny or w.k >= nz:
                    break
                if w.t > max_range:
                    break
                if solid[w.i, w.j, w.k]:
                    out[n] = w.t
                    break
                _next(&w)
    return out_arr


def integrate_rays(signed char[:, :, ::1] occ, origin_in, double r, o, const double[:, ::1] dirs,
                   const double[::1] dists, double max_range, double nudge):
    cdef Py_ssize_t nx = occ.shape[0], ny = occ.shape[1], nz = occ.shape[2]
    cdef double origin[3]
    origin[0] = origin_in[0]; origin[1] = origin_in[1]; origin[2] = origin_in[2]
    cdef double ox = o[0], oy = o[1], oz = o[2]
    cdef Py_ssize_t n, count = dirs.shape[0]
    cdef long n_free = 0, n_occ = 0
    cdef long bbox[6]
    cdef long i, j, k, b
    cdef double d, px, py, pz, limit
    cdef Walker w
    for b in range(6):
        bbox[b] = -1
    with nogil:
        for n in range(count):
            d = dists[n]
            if isfinite(d) and d <= max_range:
                px = ox + (d + nudge) * dirs[n, 0]
                py = oy + (d + nudge) * dirs[n, 1]
                pz = oz + (d + nudge) * dirs[n, 2]
                i = <long>floor((px - origin[0]) / r)
                j = <long>floor((py - origin[1]) / r)
                k = <long>floor((pz - origin[2]) / r)
                if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz and occ[i, j, k] != OCCUPIED:
                    occ[i, j, k] = OCCUPIED
                    n_occ += 1
                    if bbox[0] < 0:
                        bbox[0] = i; bbox[1] = j; bbox[2] = k
                        bbox[3] = i; bbox[4] = j; bbox[5] = k
                    else:
                        if i < bbox[0]: bbox[0] = i
                        if j < bbox[1]: bbox[1] = j
                        if k < bbox[2]: bbox[2] = k
                        if i > bbox[3]: bbox[3] = i
                        if j > bbox[4]: bbox[4] = j
                        if k > bbox[5]: bbox[5] = k
        for n in range(count):
            d = dists[n]
            if isfinite(d) and d <= max_range:
                limit = d
            else:
                limit = max_range
            _init(&w, ox, oy, oz, dirs[n, 0], dirs[n, 1], dirs[n, 2], origin, r)
            while 0 <= w.i < nx and 0 <= w.j < ny and 0 <= w.k < nz and w.t < limit:
                if occ[w.i, w.j, w.k] == UNKNOWN:
                    occ[w.i, w.j, w.k] = FREE
                    n_free += 1
                _next(&w)
    return n_free, n_occ, np.array([bbox[0], bbox[1], bbox[2], bbox[3], bbox[4], bbox[5]], dtype=np.int64)


def gain_rays(const signed char[:, :, ::1] occ, origin_in, double r, o, const double[:, ::1] dirs,
              double max_range, double yaw, double half_h, double half_v, bint full_h, clip,
              unsigned char[:, :, ::1] visited, int count_state):
    cdef Py_ssize_t nx = occ.shape[0], ny = occ.shape[1], nz = occ.shape[2]
    cdef double origin[3]
    origin[0] = origin_in[0]; origin[1] = origin_in[1]; origin[2] = origin_in[2]
    cdef double ox = o[0], oy = o[1], oz = o[2]
    cdef double cyaw = cos(yaw), syaw = sin(yaw)
    cdef long lo_i = max(<long>clip[0], 0), lo_j = max(<long>clip[1], 0), lo_k = max(<long>clip[2], 0)
    cdef long hi_i = min(<long>clip[3], nx), hi_j = min(<long>clip[4], ny), hi_k = min(<long>clip[5], nz)
    cdef Py_ssize_t n, count_rays = dirs.shape[0]
    cdef long count = 0
    cdef long i, j, k
    cdef signed char s
    cdef double cx, cy, cz
    cdef Walker w
    with nogil:
        for n in range(count_rays):
            _init(&w, ox, oy, oz, dirs[n, 0], dirs[n, 1], dirs[n, 2], origin, r)
            while w.t < max_range:
                i = w.i; j = w.j; k = w.k
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
                _next(&w)
    return count


def visible_targets(const signed char[:, :, ::1] occ, const unsigned char[:, :, ::1] seen, origin_in, double r, o,
                    double yaw, double half_h, double half_v, bint full_h, double max_range, clip,
                    bint unseen_only, bint block_unknown):
    cdef Py_ssize_t nx = occ.shape[0], ny = occ.shape[1], nz = occ.shape[2]
    cdef double origin[3]
    origin[0] = origin_in[0]; origin[1] = origin_in[1]; origin[2] = origin_in[2]
    cdef double ox = o[0], oy = o[1], oz = o[2]
    cdef double cyaw = cos(yaw), syaw = sin(yaw)
    cdef long lo_i = max(<long>clip[0], 0, <long>floor((ox - max_range - origin[0]) / r))
    cdef long lo_j = max(<long>clip[1], 0, <long>floor((oy - max_range - origin[1]) / r))
    cdef long lo_k = max(<long>clip[2], 0, <long>floor((oz - max_range - origin[2]) / r))
    cdef long hi_i = min(<long>clip[3], nx, <long>floor((ox + max_range - origin[0]) / r) + 1)
    cdef long hi_j = min(<long>clip[4], ny, <long>floor((oy + max_range - origin[1]) / r) + 1)
    cdef long hi_k = min(<long>clip[5], nz, <long>floor((oz + max_range - origin[2]) / r) + 1)
    cdef double eps = 1e-7 * r
    cdef long i, j, k, wi, wj, wk
    cdef double cx, cy, cz, qx, qy, qz, vx, vy, vz, ex, ey, ez, length, limit
    cdef bint visible
    cdef signed char s
    cdef Walker w
    cdef Py_ssize_t cap = 1024, size = 0, n
    cdef long long[::1] iv
    cdef double[::1] dv
    cdef long long* idx_buf = <long long*>malloc(cap * sizeof(long long))
    cdef double* dist_buf = <double*>malloc(cap * sizeof(double))
    cdef long long* idx_tmp
    cdef double* dist_tmp
    if idx_buf == NULL or dist_buf == NULL:
        free(idx_buf)
        free(dist_buf)
        raise MemoryError()
    try:
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
                        _init(&w, ox, oy, oz, vx / length, vy / length, vz / length, origin, r)
                        limit = length - eps
                        _next(&w)
                        while w.t < limit:
                            wi = w.i; wj = w.j; wk = w.k
                            if wi < 0 or wj < 0 or wk < 0 or wi >= nx or wj >= ny or wk >= nz:
                                break
                            if wi == i and wj == j and wk == k:
                                break
                            s = occ[wi, wj, wk]
                            if s == OCCUPIED or (block_unknown and s == UNKNOWN):
                                visible = False
                                break
                            _next(&w)
                    if visible:
                        if size == cap:
                            cap *= 2
                            idx_tmp = <long long*>realloc(idx_buf, cap * sizeof(long long))
                            if idx_tmp == NULL:
                                raise MemoryError()
                            idx_buf = idx_tmp
                            dist_tmp = <double*>realloc(dist_buf, cap * sizeof(double))
                            if dist_tmp == NULL:
                                raise MemoryError()
                            dist_buf = dist_tmp
                        ex = cx - ox
                        ey = cy - oy
                        ez = cz - oz
                        idx_buf[size] = (i * ny + j) * nz + k
                        dist_buf[size] = sqrt(ex * ex + ey * ey + ez * ez)
                        size += 1
        idx_arr = np.empty(size, dtype=np.int64)
        dist_arr = np.empty(size, dtype=np.float64)
        iv = idx_arr
        dv = dist_arr
        for n in range(size):
            iv[n] = idx_buf[n]
            dv[n] = dist_buf[n]
    finally:
        free(idx_buf)
        free(dist_buf)
    return idx_arr, dist_arr
