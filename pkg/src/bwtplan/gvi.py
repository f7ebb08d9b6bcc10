"""Inspection planning for one compartment.

Viewpoints are taken from a lattice and kept when they sit inside the
viewing-distance band; a roadmap links them; a greedy set cover picks the
useful ones; a tour orders them; the result is flown as one path.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InspectionGraphUnreachable
from .geometry import Configuration, heading
from .plan_graph import Path, PlanGraph, extract_path, sample_free, shortest_paths
from .sensors import CollisionChecker, DEFAULT_ROBOT_BOX, camera_sensor, visible_unseen
from . import tsp

log = logging.getLogger(__name__)

VIEWPOINT = "viewpoint"


@dataclass
class GviParams:
    delta_min: float = 0.8
    delta_max: float = 1.25
    grid_pitch: float = None  # defaults to the band width
    connect_radius: float = 1.2
    gamma_v_min: float = 5.0
    extend_sample_budget: int = 400
    extend_batch: int = 40
    box_scale: float = 1.1
    robot_box: tuple = DEFAULT_ROBOT_BOX
    tsp_restarts: int = 8

    def __post_init__(self):
        if not 0 < self.delta_min < self.delta_max:
            raise ValueError("need 0 < delta_min < delta_max")
        if self.grid_pitch is None:
            self.grid_pitch = round(self.delta_max - self.delta_min, 9)
        if self.grid_pitch <= 0:
            raise ValueError("grid_pitch must be positive")


@dataclass
class Viewpoint:
    config: Configuration
    surface_distance: float
    gain: int = 0


@dataclass
class InspectionGraph:
    graph: PlanGraph
    current: int
    viewpoint_ids: list  # graph vertex of each kept viewpoint
    kept: list  # indices into the input viewpoint list
    dropped: list
    extension_samples: int = 0


@dataclass
class GviReport:
    viewpoints_generated: int = 0
    selected: int = 0
    dropped_disconnected: int = 0
    predicted_new_voxels: int = 0
    tour_cost_m: float = 0.0
    residual_voxels: int = 0
    only_from_dropped: int = 0
    extension_samples: int = 0

    def as_dict(self):
        d = asdict(self)
        d["tour_cost_m"] = round(d["tour_cost_m"], 6)
        return d


def lattice(box, pitch):
    """Points spaced ``pitch`` apart, centred in ``box``."""
    axes = []
    for lo, hi in zip(box.lo, box.hi):
        n = int(math.floor((hi - lo) / pitch + 1e-9)) + 1
        start = (lo + hi) / 2.0 - (n - 1) * pitch / 2.0
        axes.append(start + pitch * np.arange(n))
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1)


def generate_viewpoints(vmap, box, params, checker=None):
    """Collision-free lattice points in ``box`` whose distance to the nearest
    occupied voxel lies in ``[delta_min, delta_max]``.

    Each viewpoint faces the nearest occupied voxel horizontally; when that
    direction is nearly vertical it faces the box centre instead.
    """
    checker = checker or CollisionChecker(vmap, params.robot_box)
    clip = box.intersect(vmap.bounds)
    if clip is None:
        return []
    pts = lattice(clip, params.grid_pitch)
    inside = np.array([vmap.in_bounds(p) for p in pts], dtype=bool).reshape(-1)
    pts = pts[inside]
    pts = pts[checker.boxes_free(pts)]
    if len(pts) == 0:
        return []
    esdf = vmap.esdf
    idx = np.floor((pts - vmap.origin) / vmap.resolution).astype(int)
    cell = esdf[idx[:, 0], idx[:, 1], idx[:, 2]]
    # the exact distance is within half a voxel diagonal of the cell value
    slack = vmap.resolution * math.sqrt(3.0) / 2.0 + 1e-9
    near = (cell >= params.delta_min - slack) & (cell <= params.delta_max + slack)
    centre = box.center
    out = []
    for p in pts[near]:
        s = vmap.esdf_query(p)
        if not s.valid or not params.delta_min <= s.distance <= params.delta_max:
            continue
        gx, gy = -s.gradient[0], -s.gradient[1]
        if math.hypot(gx, gy) < 1e-3:
            yaw = heading(p, centre)
        else:
            yaw = math.atan2(gy, gx)
        out.append(Viewpoint(Configuration.at(p, yaw), s.distance))
    return out


def build_inspection_graph(vmap, viewpoints, current, box, params, rng=None, checker=None):
    """Roadmap over the current configuration and the viewpoints.

    When viewpoints are not connected to the current configuration, random
    free samples in ``box`` are added in batches until they are, or the
    sample budget runs out. Viewpoints still disconnected are dropped.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    checker = checker or CollisionChecker(vmap, params.robot_box)
    g = PlanGraph()
    cur = g.add_vertex(current, {"current"})
    vids = [g.add_vertex(v.config, {VIEWPOINT}) for v in viewpoints]
    g.connect_within(range(len(g)), params.connect_radius, checker)
    used = 0
    clip = box.intersect(vmap.bounds)

    def missing():
        comp = g.component(cur)
        return [k for k, v in enumerate(vids) if v not in comp]

    lost = missing()
    while lost and used < params.extend_sample_budget and clip is not None:
        n = min(params.extend_batch, params.extend_sample_budget - used)
        pts = sample_free(clip.lo, clip.hi, n, checker, rng, n * 30)
        used += n
        first = len(g)
        for p in pts:
            g.add_vertex(Configuration.at(p), {"extension"})
        g.connect_within(range(first, len(g)), params.connect_radius, checker)
        lost = missing()
    if lost:
        log.warning("dropping %d viewpoints not connected to the current position", len(lost))
    if viewpoints and not g.adj[cur]:
        raise InspectionGraphUnreachable()
    lost_set = set(lost)
    kept = [k for k in range(len(viewpoints)) if k not in lost_set]
    return InspectionGraph(g, cur, [vids[k] for k in kept], kept, lost, used)


def greedy_cover(sets, min_gain):
    """Greedy set cover on a boolean matrix (rows = viewpoints, columns = voxels).

    Repeatedly takes the row covering the most still-uncovered columns (lowest
    index on ties) while that count exceeds ``min_gain``. Returns the selected
    rows in order and their marginal gains.
    """
    sets = np.asarray(sets, dtype=bool)
    if sets.ndim != 2 or sets.shape[0] == 0:
        return [], []
    covered = np.zeros(sets.shape[1], dtype=bool)
    remaining = np.ones(sets.shape[0], dtype=bool)
    order, gains = [], []
    while remaining.any():
        marginal = (sets & ~covered).sum(axis=1)
        marginal[~remaining] = -1
        best = int(np.argmax(marginal))
        if marginal[best] <= min_gain:
            break
        order.append(best)
        gains.append(int(marginal[best]))
        covered |= sets[best]
        remaining[best] = False
    return order, gains


def visibility_matrix(vmap, viewpoints, camera, box):
    """Boolean matrix of unseen occupied voxels visible from each viewpoint, plus the voxel ids."""
    per = [visible_unseen(vmap, v.config, camera, box) for v in viewpoints]
    if not per:
        return np.zeros((0, 0), dtype=bool), np.zeros(0, dtype=np.int64)
    voxels = np.unique(np.concatenate(per)) if any(len(p) for p in per) else np.zeros(0, dtype=np.int64)
    mat = np.zeros((len(per), len(voxels)), dtype=bool)
    for k, flat in enumerate(per):
        mat[k, np.searchsorted(voxels, flat)] = True
    return mat, voxels


def greedy_select(viewpoints, vmap, camera, params, box, sets=None):
    """Greedy viewpoint selection; returns selected indices in selection order.

    Gains on the input viewpoints are initialised to their full visual gain.
    """
    if sets is None:
        sets, _ = visibility_matrix(vmap, viewpoints, camera, box)
    for v, row in zip(viewpoints, sets):
        v.gain = int(row.sum())
    order, _ = greedy_cover(sets, params.gamma_v_min)
    return order


def _tour_segments(graph, nodes, seed, restarts):
    trees = [shortest_paths(graph, v) for v in nodes]
    k = len(nodes)
    cost = np.array([[trees[a].dist[nodes[b]] for b in range(k)] for a in range(k)])
    problem = tsp.TourProblem.open_path(cost, 0)
    result = tsp.solve(problem, seed=seed, restarts=restarts)
    segments = [extract_path(graph, trees[a], nodes[b]) for a, b in zip(result.order, result.order[1:])]
    return result, segments


def plan_inspection(vmap, current, box, params, camera=None, rng=None, checker=None, seed=0):
    """Inspection path for ``box`` starting at ``current``; returns ``(path, report)``."""
    camera = camera or camera_sensor()
    rng = rng if rng is not None else np.random.default_rng(seed)
    checker = checker or CollisionChecker(vmap, params.robot_box)
    report = GviReport()
    viewpoints = generate_viewpoints(vmap, box, params, checker)
    report.viewpoints_generated = len(viewpoints)
    all_sets, voxels = visibility_matrix(vmap, viewpoints, camera, box)
    stay = Path([current])
    unseen_in_box = _unseen_surface(vmap, box)
    if not viewpoints:
        report.residual_voxels = len(unseen_in_box)
        return stay, report
    ig = build_inspection_graph(vmap, viewpoints, current, box, params, rng, checker)
    report.dropped_disconnected = len(ig.dropped)
    report.extension_samples = ig.extension_samples
    kept_vps = [viewpoints[k] for k in ig.kept]
    sets = all_sets[ig.kept] if len(voxels) else np.zeros((len(ig.kept), 0), dtype=bool)
    order = greedy_select(kept_vps, vmap, camera, params, box, sets)
    reachable = sets.any(axis=0) if len(sets) else np.zeros(len(voxels), dtype=bool)
    from_dropped = all_sets[ig.dropped].any(axis=0) if ig.dropped and len(voxels) else np.zeros(len(voxels), bool)
    report.only_from_dropped = int(np.count_nonzero(from_dropped & ~reachable))
    covered = sets[order].any(axis=0) if order else np.zeros(len(voxels), dtype=bool)
    report.predicted_new_voxels = int(covered.sum())
    report.residual_voxels = int(len(np.setdiff1d(unseen_in_box, voxels[covered])))
    report.selected = len(order)
    if not order:
        return stay, report
    nodes = [ig.current] + [ig.viewpoint_ids[k] for k in order]
    result, segments = _tour_segments(ig.graph, nodes, seed, params.tsp_restarts)
    report.tour_cost_m = result.cost
    yaw_of = {ig.viewpoint_ids[k]: kept_vps[k].config.psi for k in order}
    path = Path([current])
    for seg, target in zip(segments, result.order[1:]):
        vid = nodes[target]
        wps = list(seg.waypoints)
        wps[-1] = wps[-1].with_yaw(yaw_of[vid])
        tags = [frozenset()] * (len(wps) - 1) + [frozenset({VIEWPOINT})]
        path.extend(Path(wps, tags))
    return path, report


def _unseen_surface(vmap, box):
    """Flat indices of unseen surface voxels whose centres lie in ``box``."""
    mask = np.zeros(vmap.shape, dtype=bool)
    sl = vmap.slices(box)
    mask[sl] = vmap.surface_mask()[sl] & (vmap.seen[sl] == 0)
    return np.flatnonzero(mask)
