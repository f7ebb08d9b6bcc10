"""Procedural multi-compartment tanks and the ground truth used to simulate
sensors and score missions."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .geometry import Box, Configuration
from .voxel_map import FREE, OCCUPIED, VoxelMap


@dataclass(frozen=True)
class Compartment:
    id: int
    center: tuple
    dims: tuple

    @property
    def box(self):
        return Box.around(self.center, self.dims)


@dataclass(frozen=True)
class Manhole:
    center: tuple
    normal: tuple  # unit vector pointing into connects[0]
    height: float
    width: float
    connects: tuple

    def other(self, cid):
        a, b = self.connects
        return b if cid == a else a

    def side_normal(self, cid):
        """Unit normal pointing into compartment ``cid``."""
        n = np.asarray(self.normal, dtype=float)
        return n if cid == self.connects[0] else -n


@dataclass
class MissionSpec:
    compartments: list
    manholes: list
    start_compartment: int = 0
    time_budget: float = 5400.0

    def __post_init__(self):
        ids = {c.id for c in self.compartments}
        if self.start_compartment not in ids:
            raise ValueError("start compartment does not exist")
        for c in self.compartments:
            if min(c.dims) <= 0:
                raise ValueError(f"compartment {c.id} has non-positive dims")
        for m in self.manholes:
            a, b = m.connects
            if a == b or a not in ids or b not in ids:
                raise ValueError(f"manhole {m.connects} must join two distinct compartments")

    def compartment(self, cid):
        return self.compartments[cid]

    def manholes_of(self, cid):
        return [k for k, m in enumerate(self.manholes) if cid in m.connects]

    def neighbors(self, cid):
        return sorted({self.manholes[k].other(cid) for k in self.manholes_of(cid)})

    def to_dict(self):
        return {
            "start_compartment": self.start_compartment,
            "time_budget": self.time_budget,
            "compartments": [{"id": c.id, "center": list(c.center), "dims": list(c.dims)} for c in self.compartments],
            "manholes": [{"center": list(m.center), "normal": list(m.normal), "height": m.height,
                          "width": m.width, "connects": list(m.connects)} for m in self.manholes],
        }


@dataclass
class TankWorld:
    """Solid boxes (walls, floors, ceilings, optional plates) on a regular layout."""

    boxes: np.ndarray  # (n, 2, 3): lower and upper corners
    bounds: Box
    rows: int
    cols: int
    comp_dims: tuple
    wall_thickness: float
    seed: int
    grid: float
    manholes: list = field(default_factory=list)
    _truth: dict = field(default_factory=dict, repr=False)

    # -- exact geometry -----------------------------------------------------

    def raycast(self, origin, direction, max_range):
        """Nearest intersection of a ray with the solids within ``max_range``, or ``None``."""
        o = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("direction must be non-zero")
        d = d / n
        t = self.ray_distances(o, d[None])[0]
        if not t <= max_range:
            return None
        return o + t * d

    def ray_distances(self, origin, dirs):
        """Slab-test distance from ``origin`` along each unit direction to the first box (inf if none)."""
        lo = self.boxes[:, 0][None]
        hi = self.boxes[:, 1][None]
        d = np.asarray(dirs, dtype=float)[:, None, :]
        o = np.asarray(origin, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
        tmin = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
        tmax = np.where(np.isnan(t1), np.inf, np.maximum(t1, t2))
        # parallel rays: inside the slab iff the origin lies between the planes
        par = d == 0
        inside = (o >= lo) & (o <= hi)
        tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
        tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
        near = tmin.max(axis=2)
        far = tmax.min(axis=2)
        hit = (near <= far) & (far >= 0)
        t = np.where(hit, np.maximum(near, 0.0), np.inf)
        return t.min(axis=1, initial=np.inf)

    def point_in_solid(self, p):
        p = np.asarray(p, dtype=float)
        return bool(np.any(np.all((p > self.boxes[:, 0]) & (p < self.boxes[:, 1]), axis=1)))

    # -- voxel truth --------------------------------------------------------

    def new_map(self, resolution=None, esdf_cap=2.0):
        r = resolution or self.grid
        return VoxelMap.from_bounds(self.bounds.lo, self.bounds.hi, r, esdf_cap=esdf_cap)

    def solid_grid(self, resolution=None):
        """Voxels whose centre lies strictly inside a solid, on the map grid."""
        r = resolution or self.grid
        if r not in self._truth:
            shape = tuple(np.ceil((np.array(self.bounds.hi) - self.bounds.lo) / r - 1e-9).astype(int))
            solid = np.zeros(shape, dtype=np.uint8)
            o = np.array(self.bounds.lo)
            for lo, hi in self.boxes:
                a = np.floor((lo - o) / r - 0.5 + 1e-9).astype(int) + 1
                b = np.ceil((hi - o) / r - 0.5 - 1e-9).astype(int)
                a = np.clip(a, 0, shape)
                b = np.clip(b, 0, shape)
                if np.all(b > a):
                    solid[a[0]:b[0], a[1]:b[1], a[2]:b[2]] = 1
            self._truth[r] = solid
        return self._truth[r]

    def scan(self, vmap, pose, sensor, resolution=1.5, noise_sigma=0.0, rng=None):
        """Simulated depth scan from ``pose`` integrated into ``vmap``; returns the scan delta."""
        solid = self.solid_grid(vmap.resolution)
        o = pose.position if isinstance(pose, Configuration) else np.asarray(pose, dtype=float)
        yaw = pose.psi if isinstance(pose, Configuration) else 0.0
        dirs = sensor.ray_directions(yaw, resolution)
        dist = kernels.trace_solid(solid, vmap.origin, vmap.resolution, o, dirs, sensor.max_range)
        if noise_sigma > 0:
            rng = rng if rng is not None else np.random.default_rng(self.seed)
            finite = np.isfinite(dist)
            dist = dist.copy()
            dist[finite] = np.clip(dist[finite] + rng.normal(0.0, noise_sigma, finite.sum()), 1e-3,
                                   sensor.max_range)
        return vmap.integrate_rays(o, dirs, dist, sensor.max_range)

    def compartment_of(self, p):
        l, w, _ = self.comp_dims
        t = self.wall_thickness
        c = int(math.floor((p[0] - t / 2) / (l + t)))
        r = int(math.floor((p[1] - t / 2) / (w + t)))
        if 0 <= c < self.cols and 0 <= r < self.rows:
            return r * self.cols + c
        return None

    def export_triangles(self, stream):
        """ASCII triangle list, one ``x1 y1 z1 x2 y2 z2 x3 y3 z3`` line per triangle."""
        faces = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
        for lo, hi in self.boxes:
            corners = [(x, y, z) for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
            for a, b, c, d in faces:
                for tri in ((a, b, c), (a, c, d)):
                    stream.write(" ".join(f"{v:.4f}" for k in tri for v in corners[k]) + "\n")


def _snap(v, grid):
    return math.floor(v / grid + 0.5) * grid


def _wall_pieces(fixed_axis, fixed_lo, fixed_hi, span, z_span, holes):
    """Solid pieces of a wall slab with rectangular holes.

    ``span`` is the wall's extent along its long horizontal axis; each hole is
    ``(u_lo, u_hi, z_lo, z_hi)``.
    """
    long_axis = 1 if fixed_axis == 0 else 0
    cuts = sorted({span[0], span[1], *[h[0] for h in holes], *[h[1] for h in holes]})
    pieces = []
    for u0, u1 in zip(cuts, cuts[1:]):
        if u1 - u0 <= 1e-12:
            continue
        mid = (u0 + u1) / 2
        zs = [z_span]
        for h in holes:
            if h[0] < mid < h[1]:
                zs = [(z_span[0], h[2]), (h[3], z_span[1])]
        for z0, z1 in zs:
            if z1 - z0 <= 1e-12:
                continue
            lo, hi = [0.0] * 3, [0.0] * 3
            lo[fixed_axis], hi[fixed_axis] = fixed_lo, fixed_hi
            lo[long_axis], hi[long_axis] = u0, u1
            lo[2], hi[2] = z0, z1
            pieces.append((lo, hi))
    return pieces


def generate_tank(rows, cols, comp_dims=(4.0, 3.5, 3.0), manhole_dims=(0.8, 0.6), wall_thickness=0.2, seed=0,
                  grid=0.1, randomize_manholes=False, clutter=False, time_budget=5400.0):
    """Grid of cuboid compartments joined by manholes in their shared walls.

    Compartments are laid out with columns along x and rows along y; compartment
    ``row * cols + col``. Every shared wall gets one centred manhole unless
    ``randomize_manholes`` is set, in which case a random spanning tree of walls
    (plus a few extra) get manholes at random offsets.

    Returns ``(world, mission_spec)``.
    """
    l, w, h = (float(v) for v in comp_dims)
    mh, mw = (float(v) for v in manhole_dims)
    t = float(wall_thickness)
    if rows < 1 or cols < 1 or min(l, w, h, t) <= 0 or min(mh, mw) <= 0:
        raise ValueError("inconsistent tank dimensions")
    if mh >= h or mw >= min(l, w):
        raise ValueError("manhole must be smaller than the shared wall")
    rng = np.random.default_rng(seed)
    X, Y, Z = cols * (l + t) + t, rows * (w + t) + t, h + 2 * t

    def interior(r, c):
        lo = (t + c * (l + t), t + r * (w + t), t)
        return lo, (lo[0] + l, lo[1] + w, lo[2] + h)

    compartments = []
    for r in range(rows):
        for c in range(cols):
            lo, hi = interior(r, c)
            center = tuple(round((a + b) / 2, 9) for a, b in zip(lo, hi))
            compartments.append(Compartment(r * cols + c, center, (l, w, h)))

    # candidate shared walls: (a, b, axis) with a at the lower coordinate
    walls = [(r * cols + c, r * cols + c + 1, 0) for r in range(rows) for c in range(cols - 1)]
    walls += [(r * cols + c, (r + 1) * cols + c, 1) for r in range(rows - 1) for c in range(cols)]
    if randomize_manholes and walls:
        chosen = _random_tree(rows * cols, walls, rng)
        extra = [k for k in range(len(walls)) if k not in chosen and rng.random() < 0.3]
        chosen = sorted(set(chosen) | set(extra))
    else:
        chosen = list(range(len(walls)))

    manholes = []
    holes = {}  # (axis, wall index along axis) -> list of holes
    for k in chosen:
        a, b, axis = walls[k]
        ra, ca = divmod(a, cols)
        lo, hi = interior(ra, ca)
        long_axis = 1 - axis
        span = (lo[long_axis], hi[long_axis])
        if randomize_manholes:
            margin = 0.3
            u_c = rng.uniform(span[0] + margin + mw / 2, span[1] - margin - mw / 2)
            z_c = rng.uniform(t + margin + mh / 2, t + h - margin - mh / 2)
        else:
            u_c, z_c = (span[0] + span[1]) / 2, t + h / 2
        u0 = _snap(u_c - mw / 2, grid)
        z0 = _snap(z_c - mh / 2, grid)
        u1, z1 = u0 + mw, z0 + mh
        plane = hi[axis] + t / 2  # wall mid-plane between a and b
        center = [0.0, 0.0, 0.0]
        center[axis] = round(plane, 9)
        center[long_axis] = round((u0 + u1) / 2, 9)
        center[2] = round((z0 + z1) / 2, 9)
        normal = [0.0, 0.0, 0.0]
        normal[axis] = -1.0
        manholes.append(Manhole(tuple(center), tuple(normal), mh, mw, (a, b)))
        wall_index = (ca + 1) if axis == 0 else (ra + 1)
        holes.setdefault((axis, wall_index), []).append((u0, u1, z0, z1))

    boxes = [((0, 0, 0), (X, Y, t)), ((0, 0, t + h), (X, Y, Z))]
    for k in range(cols + 1):
        x0 = k * (l + t)
        boxes += _wall_pieces(0, x0, x0 + t, (0.0, Y), (t, t + h), holes.get((0, k), []))
    for k in range(rows + 1):
        y0 = k * (w + t)
        boxes += _wall_pieces(1, y0, y0 + t, (0.0, X), (t, t + h), holes.get((1, k), []))
    if clutter:
        boxes += _stiffeners(compartments, manholes)
    world = TankWorld(np.array(boxes, dtype=float), Box((0, 0, 0), (X, Y, Z)), rows, cols, (l, w, h), t, seed,
                      grid, manholes)
    spec = MissionSpec(compartments, manholes, 0, time_budget)
    return world, spec


def _random_tree(n, walls, rng):
    """Indices of walls forming a random spanning tree over ``n`` compartments."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    chosen = []
    for k in rng.permutation(len(walls)):
        a, b, _ = walls[k]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            chosen.append(int(k))
    return chosen


def _stiffeners(compartments, manholes, clearance=0.8):
    """Vertical ribs along the long walls of each compartment (0.1 m thick, 0.3 m deep).

    Ribs closer than ``clearance`` to a manhole centre are left out.
    """
    centers = np.array([m.center for m in manholes]).reshape(-1, 3)
    out = []
    for c in compartments:
        lo = np.array(c.center) - np.array(c.dims) / 2
        hi = np.array(c.center) + np.array(c.dims) / 2
        for x in np.arange(lo[0] + 1.0, hi[0] - 0.5, 1.0):
            x = round(float(x), 9)
            for y0, y1 in ((lo[1], lo[1] + 0.3), (hi[1] - 0.3, hi[1])):
                near = np.abs(centers[:, 0] - (x + 0.05)) < clearance
                near &= np.abs(centers[:, 1] - (y0 + y1) / 2) < clearance
                if not near.any():
                    out.append(((x, y0, lo[2]), (x + 0.1, y1, hi[2])))
    return out


# -- oracles ------------------------------------------------------------------


@dataclass
class GroundTruth:
    surface: np.ndarray  # bool, solid voxels touching reachable free space
    reachable_free: np.ndarray
    resolution: float

    @property
    def surface_voxels(self):
        return int(self.surface.sum())

    @property
    def surface_area(self):
        return self.surface_voxels * self.resolution ** 2

    @property
    def free_volume(self):
        return int(self.reachable_free.sum()) * self.resolution ** 3


def _six_neighbour_any(mask):
    out = np.zeros_like(mask)
    out[1:] |= mask[:-1]
    out[:-1] |= mask[1:]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    out[:, :, 1:] |= mask[:, :, :-1]
    out[:, :, :-1] |= mask[:, :, 1:]
    return out


def ground_truth_stats(world, resolution=None, seeds=None):
    """Surface voxels and free volume reachable from the compartment interiors."""
    r = resolution or world.grid
    solid = world.solid_grid(r).astype(bool)
    free = ~solid
    labels, _ = ndimage.label(free)
    if seeds is None:
        seeds = [c.center for c in _compartments(world)]
    keep = set()
    o = np.array(world.bounds.lo)
    for p in seeds:
        idx = tuple(np.floor((np.asarray(p) - o) / r).astype(int))
        if labels[idx]:
            keep.add(int(labels[idx]))
    reach = np.isin(labels, sorted(keep)) if keep else np.zeros_like(free)
    surface = solid & _six_neighbour_any(reach)
    return GroundTruth(surface, reach, r)


def _compartments(world):
    l, w, h = world.comp_dims
    t = world.wall_thickness
    for r in range(world.rows):
        for c in range(world.cols):
            yield Compartment(r * world.cols + c, (t + c * (l + t) + l / 2, t + r * (w + t) + w / 2, t + h / 2),
                              (l, w, h))


def truth_map(world, resolution=None):
    """Fully explored map of the world: solids occupied, everything else free."""
    vm = world.new_map(resolution)
    solid = world.solid_grid(vm.resolution).astype(bool)
    vm.occupancy[...] = np.where(solid, OCCUPIED, FREE)
    vm._mark_dirty((0, 0, 0, *(np.array(vm.shape) - 1)))
    return vm


def camera_reachable_surface(world, camera, robot_box, delta_min, delta_max, resolution=None, pitch=0.2):
    """Surface voxels visible to the camera (any yaw) from some collision-free
    position whose distance to the nearest surface lies in the viewing band.

    Returns ``(mask, positions_used)``.
    """
    from .sensors import CollisionChecker, SensorModel

    vm = truth_map(world, resolution)
    truth = ground_truth_stats(world, vm.resolution)
    checker = CollisionChecker(vm, robot_box)
    lo = np.array(world.bounds.lo) + pitch / 2
    hi = np.array(world.bounds.hi)
    axes = [np.arange(a, b, pitch) for a, b in zip(lo, hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    pts = pts[checker.boxes_free(pts)]
    esdf = vm.esdf
    idx = np.floor((pts - vm.origin) / vm.resolution).astype(int)
    cell = esdf[idx[:, 0], idx[:, 1], idx[:, 2]]
    slack = vm.resolution * math.sqrt(3.0) / 2.0
    pts = pts[(cell >= delta_min - slack) & (cell <= delta_max + slack)]
    keep = []
    for p in pts:
        s = vm.esdf_query(p)
        if s.valid and delta_min <= s.distance <= delta_max:
            keep.append(p)
    panoramic = SensorModel("camera", 360.0, camera.fov_v, camera.max_range)
    for p in keep:
        vm.mark_camera_coverage(Configuration.at(p), panoramic)
    seen = vm.seen.astype(bool) & truth.surface
    return seen, len(keep)
