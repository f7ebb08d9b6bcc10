"""Frustum sensor models, information gains and collision checking."""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .geometry import Configuration
from .kernels import FREE, UNKNOWN

DEFAULT_ROBOT_BOX = (0.4, 0.4, 0.3)


@dataclass(frozen=True)
class SensorModel:
    """Yaw-mounted frustum sensor.

    ``fov_h``/``fov_v`` are full angles in degrees; ``ray_resolution`` (degrees)
    sets the ray grid used for gain estimation and simulated scans.
    """

    kind: str
    fov_h: float
    fov_v: float
    max_range: float
    ray_resolution: float = 3.0
    mount_yaw_only: bool = True

    def __post_init__(self):
        if self.kind not in ("depth", "camera"):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if not 0 < self.fov_h <= 360:
            raise ValueError("fov_h must be in (0, 360]")
        if not 0 < self.fov_v < 180:
            raise ValueError("fov_v must be in (0, 180)")
        if self.max_range <= 0 or self.ray_resolution <= 0:
            raise ValueError("max_range and ray_resolution must be positive")

    def ray_directions(self, yaw=0.0, resolution=None):
        """Unit ray directions over the field of view, rotated by ``yaw``."""
        res = self.ray_resolution if resolution is None else resolution
        local = _ray_grid(float(self.fov_h), float(self.fov_v), float(res))
        if yaw == 0.0:
            return local
        c, s = math.cos(yaw), math.sin(yaw)
        out = np.empty_like(local)
        out[:, 0] = c * local[:, 0] - s * local[:, 1]
        out[:, 1] = s * local[:, 0] + c * local[:, 1]
        out[:, 2] = local[:, 2]
        return out

    def contains(self, origin, yaw, point):
        """True if ``point`` lies inside this frustum placed at ``origin`` with heading ``yaw``."""
        v = np.asarray(point, dtype=float) - np.asarray(origin, dtype=float)
        if v @ v > self.max_range ** 2:
            return False
        if self.fov_h < 360:
            lx = math.cos(yaw) * v[0] + math.sin(yaw) * v[1]
            ly = -math.sin(yaw) * v[0] + math.cos(yaw) * v[1]
            if abs(math.atan2(ly, lx)) > math.radians(self.fov_h) / 2:
                return False
        return abs(math.atan2(v[2], math.hypot(v[0], v[1]))) <= math.radians(self.fov_v) / 2


@lru_cache(maxsize=32)
def _ray_grid(fov_h, fov_v, res):
    n_h = max(1, math.ceil(fov_h / res - 1e-9))
    n_v = max(1, math.ceil(fov_v / res - 1e-9))
    az = np.radians(-fov_h / 2 + (np.arange(n_h) + 0.5) * fov_h / n_h)
    el = np.radians(-fov_v / 2 + (np.arange(n_v) + 0.5) * fov_v / n_v)
    a, e = np.meshgrid(az, el, indexing="ij")
    d = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1).reshape(-1, 3)
    d.setflags(write=False)
    return d


def depth_sensor(max_range=10.0, fov=(360.0, 90.0), ray_resolution=3.0):
    return SensorModel("depth", fov[0], fov[1], max_range, ray_resolution)


def camera_sensor(max_range=3.0, fov=(85.0, 64.0), ray_resolution=3.0):
    return SensorModel("camera", fov[0], fov[1], max_range, ray_resolution)


def volume_gain(vmap, config, depth, clip=None):
    """Number of unknown voxels the depth sensor would perceive from ``config``.

    Rays on the sensor's angular grid stop at the first occupied voxel, at
    max range, or on leaving ``clip``; a voxel counts once, and only if its
    center lies inside the frustum.
    """
    visited = np.zeros(vmap.shape, dtype=np.uint8)
    return kernels.gain_rays(
        vmap.occupancy, vmap.origin, vmap.resolution, config.position, depth.ray_directions(config.psi),
        depth.max_range, config.psi, math.radians(depth.fov_h) / 2, math.radians(depth.fov_v) / 2,
        depth.fov_h >= 360, vmap.index_range(clip), visited, UNKNOWN)


def visual_gain(vmap, config, camera, clip=None):
    """Number of unseen occupied voxels the camera would perceive from ``config``."""
    flat, _ = vmap.visible_occupied(config, camera, clip, unseen_only=True)
    return len(flat)


def visible_unseen(vmap, config, camera, clip=None):
    """Flat indices of the unseen occupied voxels visible from ``config``."""
    flat, _ = vmap.visible_occupied(config, camera, clip, unseen_only=True)
    return flat


class CollisionChecker:
    """Box collision queries against a map snapshot.

    A configuration is free when the robot box centered on it overlaps only
    free voxels; unknown voxels and the outside of the map count as obstacles.
    Queries are O(1) via a summed-volume table.
    """

    def __init__(self, vmap, robot_box=DEFAULT_ROBOT_BOX):
        self.origin = vmap.origin.copy()
        self.resolution = vmap.resolution
        self.shape = np.array(vmap.shape)
        self.half = np.asarray(robot_box, dtype=float) / 2.0
        blocked = (vmap.occupancy != FREE).astype(np.int32)
        table = np.zeros(tuple(self.shape + 1), dtype=np.int32)
        table[1:, 1:, 1:] = blocked.cumsum(0).cumsum(1).cumsum(2)
        self._table = table

    def boxes_free(self, centers, half=None):
        half = self.half if half is None else np.asarray(half, dtype=float)
        c = np.asarray(centers, dtype=float).reshape(-1, 3)
        r = self.resolution
        lo = np.floor((c - half - self.origin) / r + 1e-9).astype(np.int64)
        hi = np.ceil((c + half - self.origin) / r - 1e-9).astype(np.int64)
        inside = np.all(lo >= 0, axis=1) & np.all(hi <= self.shape, axis=1)
        lo = np.clip(lo, 0, self.shape)
        hi = np.clip(hi, 0, self.shape)
        t = self._table
        x0, y0, z0 = lo.T
        x1, y1, z1 = hi.T
        total = (t[x1, y1, z1] - t[x0, y1, z1] - t[x1, y0, z1] - t[x1, y1, z0]
                 + t[x0, y0, z1] + t[x0, y1, z0] + t[x1, y0, z0] - t[x0, y0, z0])
        return inside & (total == 0)

    def is_free(self, point, half=None):
        return bool(self.boxes_free(np.asarray(point, dtype=float)[:3], half)[0])

    def segments_free(self, starts, ends, half=None):
        """Sweep the box along each segment at steps of at most half a voxel."""
        a = np.asarray(starts, dtype=float).reshape(-1, 3)
        b = np.asarray(ends, dtype=float).reshape(-1, 3)
        if len(a) == 0:
            return np.zeros(0, dtype=bool)
        length = np.linalg.norm(b - a, axis=1)
        n = np.ceil(length / (self.resolution / 2.0)).astype(np.int64) + 1
        seg = np.repeat(np.arange(len(a)), n)
        offsets = np.concatenate([[0], np.cumsum(n)[:-1]])
        k = np.arange(n.sum()) - np.repeat(offsets, n)
        frac = k / np.maximum(np.repeat(n, n) - 1, 1)
        pts = a[seg] + (b - a)[seg] * frac[:, None]
        ok = self.boxes_free(pts, half)
        return np.minimum.reduceat(ok.astype(np.int8), offsets).astype(bool)

    def segment_free(self, a, b, half=None):
        return bool(self.segments_free(np.asarray(a, dtype=float)[:3], np.asarray(b, dtype=float)[:3], half)[0])


def collision_check(vmap, config, robot_box=DEFAULT_ROBOT_BOX):
    """True iff the robot box at ``config`` overlaps no occupied or unknown voxel."""
    pos = config.position if isinstance(config, Configuration) else config
    return vmap.box_free(pos, robot_box)
