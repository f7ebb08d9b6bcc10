"""Uniform voxel map with inspection annotations and a Euclidean distance field.

Each voxel holds an occupancy state (unknown / free / occupied), a camera
``seen`` flag and the closest distance it was observed from. The distance
field stores, for every voxel center, the distance to the nearest occupied
voxel center. It is refreshed lazily over the region touched by new occupied
voxels, dilated by ``esdf_cap``; distances beyond the cap are ``inf``.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import MapError
from .geometry import Box, Configuration
from .kernels import FREE, OCCUPIED, UNKNOWN

STATE_CODES = {UNKNOWN: "U", FREE: "F", OCCUPIED: "O"}

# terminal voxel of a ray = voxel containing the hit point pushed this far
# (in voxels) along the ray, so hits on a voxel face land in the solid voxel
HIT_NUDGE = 1e-4


@dataclass
class ScanDelta:
    newly_free: int = 0
    newly_occupied: int = 0
    skipped_rays: int = 0
    occupied_bbox: tuple = None  # inclusive index box of newly occupied voxels


@dataclass(frozen=True)
class EsdfSample:
    distance: float
    gradient: np.ndarray = field(default_factory=lambda: np.zeros(3))
    valid: bool = True
    nearest: tuple = None  # index of the nearest occupied voxel


@dataclass(frozen=True)
class CoverageStats:
    V_tot: float
    S_tot: float
    S_seen: float
    lambda_C: float  # None when there is no surface to inspect
    unseen_occupied: int
    surface_voxels: int
    seen_surface_voxels: int

    def lambda_text(self):
        return format_percent(self.lambda_C)


def format_percent(value):
    return "undefined" if value is None else f"{value:.2f}"


def parse_percent(text):
    text = text.strip()
    return None if text == "undefined" else round(float(text), 2)


class VoxelMap:
    def __init__(self, origin, shape, resolution, esdf_cap=2.0):
        self.origin = np.asarray(origin, dtype=float).reshape(3).copy()
        self.shape = tuple(int(n) for n in shape)
        if resolution <= 0 or min(self.shape) <= 0:
            raise MapError("resolution and shape must be positive")
        self.resolution = float(resolution)
        self.esdf_cap = float(esdf_cap)
        self.occupancy = np.zeros(self.shape, dtype=np.int8)
        self.seen = np.zeros(self.shape, dtype=np.uint8)
        self.obs_distance = np.full(self.shape, np.nan)
        self._esdf = np.full(self.shape, np.inf)
        self._dirty = None
        self.version = 0

    @classmethod
    def from_bounds(cls, lo, hi, resolution, **kwargs):
        lo = np.asarray(lo, dtype=float)
        extent = np.asarray(hi, dtype=float) - lo
        shape = np.ceil(extent / resolution - 1e-9).astype(int)
        return cls(lo, shape, resolution, **kwargs)

    def copy(self):
        other = VoxelMap(self.origin, self.shape, self.resolution, self.esdf_cap)
        other.occupancy[...] = self.occupancy
        other.seen[...] = self.seen
        other.obs_distance[...] = self.obs_distance
        other._esdf[...] = self._esdf
        other._dirty = None if self._dirty is None else list(self._dirty)
        other.version = self.version
        return other

    # -- geometry -----------------------------------------------------------

    @property
    def bounds(self):
        return Box(tuple(self.origin), tuple(self.origin + np.array(self.shape) * self.resolution))

    @property
    def size(self):
        return int(np.prod(self.shape))

    def in_bounds(self, p):
        g = (np.asarray(p, dtype=float)[:3] - self.origin) / self.resolution
        return bool(np.all(g >= 0) and np.all(g < np.array(self.shape)))

    def index_of(self, p):
        """Index of the voxel containing ``p``, or ``None`` outside the map."""
        g = np.floor((np.asarray(p, dtype=float)[:3] - self.origin) / self.resolution).astype(int)
        if np.any(g < 0) or np.any(g >= np.array(self.shape)):
            return None
        return tuple(int(v) for v in g)

    def center_of(self, idx):
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def centers(self, flat_indices):
        ijk = np.stack(np.unravel_index(np.asarray(flat_indices, dtype=np.int64), self.shape), axis=-1)
        return self.origin + (ijk + 0.5) * self.resolution

    def index_range(self, box):
        """Half-open index box ``[lo_i, lo_j, lo_k, hi_i, hi_j, hi_k)`` of voxels whose
        centers lie inside ``box``, clipped to the map."""
        if box is None:
            return [0, 0, 0, *self.shape]
        lo = np.ceil((np.array(box.lo) - self.origin) / self.resolution - 0.5 - 1e-9).astype(int)
        hi = np.floor((np.array(box.hi) - self.origin) / self.resolution - 0.5 + 1e-9).astype(int) + 1
        lo = np.clip(lo, 0, self.shape)
        hi = np.clip(hi, 0, self.shape)
        hi = np.maximum(hi, lo)
        return [int(v) for v in lo] + [int(v) for v in hi]

    def slices(self, box):
        c = self.index_range(box)
        return tuple(slice(c[a], c[a + 3]) for a in range(3))

    def counts(self):
        values = np.bincount(self.occupancy.ravel(), minlength=3)
        return {"unknown": int(values[UNKNOWN]), "free": int(values[FREE]), "occupied": int(values[OCCUPIED])}

    # -- depth integration --------------------------------------------------

    def integrate_depth_scan(self, pose, hits, sensor, misses=None):
        """Integrate one depth scan taken at ``pose``.

        ``hits`` are returned points (N x 3); ``misses`` are unit directions of
        rays that returned nothing within ``sensor.max_range``. Terminal voxels
        become occupied; voxels crossed on the way become free unless occupied.
        Occupied voxels are never cleared.
        """
        o = _position(pose)
        if not self.in_bounds(o):
            raise MapError(f"scan pose {tuple(np.round(o, 3))} outside map bounds")
        hits = np.asarray(hits, dtype=float).reshape(-1, 3)
        skipped = 0
        finite = np.all(np.isfinite(hits), axis=1)
        skipped += int((~finite).sum())
        hits = hits[finite]
        vec = hits - o
        dist = np.linalg.norm(vec, axis=1)
        degenerate = dist <= 0.0
        skipped += int(degenerate.sum())
        vec, dist = vec[~degenerate], dist[~degenerate]
        if np.any(dist > sensor.max_range + 1e-9):
            raise MapError("hit beyond sensor max range")
        dirs = vec / dist[:, None]
        if misses is not None:
            misses = np.asarray(misses, dtype=float).reshape(-1, 3)
            ok = np.all(np.isfinite(misses), axis=1) & (np.linalg.norm(misses, axis=1) > 0)
            skipped += int((~ok).sum())
            m = misses[ok]
            m = m / np.linalg.norm(m, axis=1)[:, None]
            dirs = np.vstack([dirs, m])
            dist = np.concatenate([dist, np.full(len(m), np.inf)])
        delta = self.integrate_rays(o, dirs, dist, sensor.max_range)
        delta.skipped_rays += skipped
        return delta

    def integrate_rays(self, origin, dirs, dists, max_range):
        """Low-level integration: unit ``dirs`` with hit distances (``inf`` = no return)."""
        if len(dirs) == 0:
            return ScanDelta()
        n_free, n_occ, bbox = kernels.integrate_rays(
            self.occupancy, self.origin, self.resolution, origin, dirs, dists, max_range,
            HIT_NUDGE * self.resolution)
        delta = ScanDelta(newly_free=int(n_free), newly_occupied=int(n_occ))
        if n_occ:
            box = tuple(int(v) for v in bbox)
            delta.occupied_bbox = box
            self._mark_dirty(box)
        if n_free or n_occ:
            self.version += 1
        return delta

    def set_occupied(self, indices):
        """Mark voxels occupied directly (fixtures and map import)."""
        idx = np.asarray(indices, dtype=int).reshape(-1, 3)
        if len(idx) == 0:
            return
        self.occupancy[idx[:, 0], idx[:, 1], idx[:, 2]] = OCCUPIED
        self._mark_dirty((*idx.min(axis=0), *idx.max(axis=0)))
        self.version += 1

    def _mark_dirty(self, box):
        if self._dirty is None:
            self._dirty = list(box)
        else:
            self._dirty = [min(self._dirty[a], box[a]) for a in range(3)] + \
                          [max(self._dirty[a + 3], box[a + 3]) for a in range(3)]

    # -- distance field -----------------------------------------------------

    @property
    def esdf(self):
        self.refresh_esdf()
        return self._esdf

    def refresh_esdf(self):
        if self._dirty is None:
            return
        lo = np.array(self._dirty[:3])
        hi = np.array(self._dirty[3:]) + 1
        self._dirty = None
        shape = np.array(self.shape)
        if math.isinf(self.esdf_cap):
            region_lo, region_hi = np.zeros(3, int), shape
            src_lo, src_hi = region_lo, region_hi
        else:
            pad = int(math.ceil(self.esdf_cap / self.resolution)) + 1
            region_lo, region_hi = np.maximum(lo - pad, 0), np.minimum(hi + pad, shape)
            src_lo, src_hi = np.maximum(region_lo - pad, 0), np.minimum(region_hi + pad, shape)
        self._esdf[_sl(region_lo, region_hi)] = _edt(
            self.occupancy[_sl(src_lo, src_hi)] != OCCUPIED, self.resolution, self.esdf_cap
        )[_sl(region_lo - src_lo, region_hi - src_lo)]

    def recompute_esdf(self):
        """Distance field computed from scratch over the whole map (reference for tests)."""
        return _edt(self.occupancy != OCCUPIED, self.resolution, self.esdf_cap)

    def esdf_query(self, point):
        """Distance from ``point`` to the nearest occupied voxel center, with gradient.

        The gradient is the unit vector from that voxel center toward ``point``;
        ties between equidistant voxels go to the lexicographically smallest
        index. Returns an invalid sample when no occupied voxel lies within the
        distance-field cap.
        """
        p = np.asarray(point, dtype=float)[:3]
        idx = self.index_of(p)
        if idx is None:
            raise MapError(f"query point {tuple(np.round(p, 3))} outside map bounds")
        cell = self.esdf[idx]
        if not np.isfinite(cell):
            return EsdfSample(math.inf, np.zeros(3), valid=False)
        r = self.resolution
        radius = cell + r * math.sqrt(3.0) / 2.0 + 1e-9
        lo = np.maximum(np.floor((p - radius - self.origin) / r).astype(int), 0)
        hi = np.minimum(np.floor((p + radius - self.origin) / r).astype(int) + 1, self.shape)
        sub = self.occupancy[_sl(lo, hi)] == OCCUPIED
        ijk = np.argwhere(sub) + lo
        centers = self.origin + (ijk + 0.5) * r
        d = np.linalg.norm(centers - p, axis=1)
        best = int(np.argmin(d))
        dist = float(d[best])
        grad = (p - centers[best]) / dist if dist > 0 else np.zeros(3)
        return EsdfSample(dist, grad, True, tuple(int(v) for v in ijk[best]))

    # -- camera coverage ----------------------------------------------------

    def visible_occupied(self, pose, camera, clip=None, unseen_only=False):
        """Flat indices and center distances of occupied voxels the camera sees from ``pose``."""
        o = _position(pose)
        yaw = pose.psi if isinstance(pose, Configuration) else 0.0
        return kernels.visible_targets(
            self.occupancy, self.seen, self.origin, self.resolution, o, yaw,
            math.radians(camera.fov_h) / 2.0, math.radians(camera.fov_v) / 2.0, camera.fov_h >= 360.0,
            camera.max_range, self.index_range(clip), unseen_only, True)

    def mark_camera_coverage(self, pose, camera, clip=None, flag=1):
        """Annotate every visible occupied voxel as seen; returns the number newly seen.

        ``flag`` is OR-ed into the seen byte so callers can tell apart which
        activity saw a voxel; any non-zero value means seen.
        """
        if not self.in_bounds(_position(pose)):
            raise MapError("camera pose outside map bounds")
        flat, dist = self.visible_occupied(pose, camera, clip)
        if len(flat) == 0:
            return 0
        seen = self.seen.reshape(-1)
        obs = self.obs_distance.reshape(-1)
        newly = int(np.count_nonzero(seen[flat] == 0))
        seen[flat] |= np.uint8(flag)
        obs[flat] = np.fmin(obs[flat], dist)
        return newly

    # -- statistics ---------------------------------------------------------

    def surface_mask(self):
        """Occupied voxels with at least one free 6-neighbor."""
        free = np.pad(self.occupancy == FREE, 1, constant_values=False)
        near_free = np.zeros(self.shape, dtype=bool)
        nx, ny, nz = self.shape
        for axis in range(3):
            for step in (-1, 1):
                s = [slice(1, nx + 1), slice(1, ny + 1), slice(1, nz + 1)]
                s[axis] = slice(1 + step, [nx, ny, nz][axis] + 1 + step)
                near_free |= free[tuple(s)]
        return (self.occupancy == OCCUPIED) & near_free

    def clear_box(self, center, extents):
        """Mark unknown voxels overlapping the box as free (space the robot body occupies)."""
        c = np.asarray(center, dtype=float)
        h = np.asarray(extents, dtype=float) / 2.0
        lo = np.maximum(np.floor((c - h - self.origin) / self.resolution + 1e-9).astype(int), 0)
        hi = np.minimum(np.ceil((c + h - self.origin) / self.resolution - 1e-9).astype(int), self.shape)
        block = self.occupancy[_sl(lo, hi)]
        n = int(np.count_nonzero(block == UNKNOWN))
        block[block == UNKNOWN] = FREE
        if n:
            self.version += 1
        return n

    def box_free(self, center, extents):
        """True iff every voxel overlapping the box is free and the box is inside the map."""
        c = np.asarray(center, dtype=float)
        h = np.asarray(extents, dtype=float) / 2.0
        lo = np.floor((c - h - self.origin) / self.resolution + 1e-9).astype(int)
        hi = np.ceil((c + h - self.origin) / self.resolution - 1e-9).astype(int)
        if np.any(lo < 0) or np.any(hi > np.array(self.shape)):
            return False
        return bool(np.all(self.occupancy[_sl(lo, hi)] == FREE))

    def coverage_stats(self, region=None, flag=None):
        """Explored volume, mapped surface and camera coverage.

        With ``flag`` only voxels whose seen byte has that bit count as seen.
        """
        sl = self.slices(region)
        occ = self.occupancy[sl]
        surface = self.surface_mask()[sl]
        seen = self.seen[sl] != 0 if flag is None else (self.seen[sl] & flag) != 0
        r = self.resolution
        n_surface = int(surface.sum())
        n_seen = int((surface & seen).sum())
        explored = int(np.count_nonzero(occ != UNKNOWN))
        lam = None if n_surface == 0 else 100.0 * n_seen / n_surface
        return CoverageStats(
            V_tot=explored * r ** 3,
            S_tot=n_surface * r ** 2,
            S_seen=n_seen * r ** 2,
            lambda_C=lam,
            unseen_occupied=n_surface - n_seen,
            surface_voxels=n_surface,
            seen_surface_voxels=n_seen,
        )


def _position(pose):
    if isinstance(pose, Configuration):
        return pose.position
    return np.asarray(pose, dtype=float)[:3]


def _sl(lo, hi):
    return tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))


def _edt(not_occupied, resolution, cap):
    if not_occupied.all():
        return np.full(not_occupied.shape, np.inf)
    d = ndimage.distance_transform_edt(not_occupied, sampling=resolution)
    if not math.isinf(cap):
        d[d > cap] = np.inf
    return d


# -- ASCII export -------------------------------------------------------------

def write_map(vmap, stream, include_unknown=False):
    """Write ``x y z state obs_distance`` lines (voxel centers, meters)."""
    lo = vmap.origin
    hi = vmap.origin + np.array(vmap.shape) * vmap.resolution
    stream.write(
        f"# voxelmap resolution={vmap.resolution:.6g} "
        f"min={lo[0]:.6f},{lo[1]:.6f},{lo[2]:.6f} max={hi[0]:.6f},{hi[1]:.6f},{hi[2]:.6f}\n"
    )
    occ = vmap.occupancy.reshape(-1)
    mask = np.ones(occ.shape, bool) if include_unknown else occ != UNKNOWN
    flat = np.flatnonzero(mask)
    centers = vmap.centers(flat)
    seen = vmap.seen.reshape(-1)[flat]
    obs = vmap.obs_distance.reshape(-1)[flat]
    states = occ[flat]
    for c, s, sn, od in zip(centers, states, seen, obs):
        code = "S" if (s == OCCUPIED and sn) else STATE_CODES[int(s)]
        dist = f"{od:.4f}" if sn else "-"
        stream.write(f"{c[0]:.4f} {c[1]:.4f} {c[2]:.4f} {code} {dist}\n")


def read_map(stream, esdf_cap=2.0):
    header = stream.readline()
    if not header.startswith("# voxelmap"):
        raise MapError("missing voxelmap header line")
    fields = dict(tok.split("=", 1) for tok in header.split()[2:])
    r = float(fields["resolution"])
    lo = [float(v) for v in fields["min"].split(",")]
    hi = [float(v) for v in fields["max"].split(",")]
    vmap = VoxelMap.from_bounds(lo, hi, r, esdf_cap=esdf_cap)
    occupied = []
    for lineno, line in enumerate(stream, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise MapError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        idx = vmap.index_of([float(parts[0]), float(parts[1]), float(parts[2])])
        if idx is None:
            raise MapError(f"line {lineno}: voxel outside header bounds")
        code = parts[3]
        if code == "F":
            vmap.occupancy[idx] = FREE
        elif code in ("O", "S"):
            occupied.append(idx)
            if code == "S":
                vmap.seen[idx] = 1
                vmap.obs_distance[idx] = float(parts[4])
        elif code != "U":
            raise MapError(f"line {lineno}: unknown state {code!r}")
    vmap.set_occupied(occupied)
    return vmap
