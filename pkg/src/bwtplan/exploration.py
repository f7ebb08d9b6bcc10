"""Volumetric exploration of one compartment and the global repositioning graph."""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoGlobalRoute
from .geometry import Box, Configuration, heading
from .plan_graph import LocalGraphParams, Path, PlanGraph, build_local_graph, extract_path, shortest_paths
from .sensors import CollisionChecker, DEFAULT_ROBOT_BOX, depth_sensor, volume_gain
from .voxel_map import UNKNOWN

CONTINUE = "Continue"
LOCAL_COMPLETE = "LocalComplete"


@dataclass
class ExplorationParams:
    zeta: float = 0.5
    mu: float = 0.5
    gamma_min: float = 20.0
    local_box_scale: float = 1.2
    exploration_direction: tuple = (1.0, 0.0)
    vertex_count: int = 200
    edge_radius: float = 1.5
    robot_box: tuple = DEFAULT_ROBOT_BOX
    z_samples: int = 10
    no_progress_limit: int = 2
    no_progress_fraction: float = 0.01
    max_iterations: int = 30

    def __post_init__(self):
        if self.zeta <= 0 or self.mu <= 0:
            raise ValueError("zeta and mu must be positive")
        if self.gamma_min < 0:
            raise ValueError("gamma_min must be non-negative")


def _unit2(v, default=(1.0, 0.0)):
    v = np.asarray(v, dtype=float)[:2]
    n = float(np.hypot(v[0], v[1]))
    if n < 1e-12:
        return np.asarray(default, dtype=float)
    return v / n


def direction_deviation(positions, direction, samples=10):
    """Mean distance between a path and the straight horizontal segment of equal
    length leaving its first point along ``direction``.

    Both curves are sampled at ``samples`` equal arc-length stations (the shared
    start point excluded). Returns 0 for a zero-length path.
    """
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(p) < 2:
        return 0.0
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0.0:
        return 0.0
    s = total * np.arange(1, samples + 1) / samples
    on_path = np.stack([np.interp(s, cum, p[:, a]) for a in range(3)], axis=1)
    d = _unit2(direction)
    straight = p[0] + s[:, None] * np.array([d[0], d[1], 0.0])
    return float(np.linalg.norm(on_path - straight, axis=1).mean())


def exploration_gain(path, gains, params, direction=None):
    """Score of a root-to-vertex path: distance-discounted vertex gains, damped by
    the path's deviation from the exploration direction.

    ``path`` is a :class:`Path` or an (m, 3) array of positions; ``gains`` are
    the per-vertex volume gains aligned with it.
    """
    pos = path.positions if isinstance(path, Path) else np.asarray(path, dtype=float).reshape(-1, 3)
    g = np.asarray(gains, dtype=float)
    if len(g) != len(pos):
        raise ValueError("gains must align with path vertices")
    direction = params.exploration_direction if direction is None else direction
    travelled = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])
    z = direction_deviation(pos, direction, params.z_samples)
    return math.exp(-params.zeta * z) * float(np.sum(g * np.exp(-params.mu * travelled)))


@dataclass
class ExplorationStep:
    path: Path
    status: str
    best_lambda: float = 0.0
    best_gain: float = 0.0
    vertex_count: int = 0
    target: int = -1
    reason: str = ""
    gains: np.ndarray = None
    lambdas: np.ndarray = None

    def record(self, iteration):
        return {"iteration": iteration, "vertex_count": self.vertex_count,
                "best_lambda": round(self.best_lambda, 6), "best_gain": round(self.best_gain, 6),
                "status": self.status, "reason": self.reason}


def plan_exploration_step(vmap, current, params, box, depth=None, rng=None, direction=None):
    """One exploration iteration inside ``box`` from ``current``.

    Samples a local graph, scores every root-to-vertex shortest path and
    returns the best one. Ties go to the shorter path, then the lower vertex id.
    """
    depth = depth or depth_sensor()
    rng = rng if rng is not None else np.random.default_rng(0)
    gparams = LocalGraphParams(params.vertex_count, params.edge_radius, params.robot_box)
    local = build_local_graph(vmap, box, current, gparams, rng)
    graph = local.graph
    stay = Path([current])
    if local.degenerate:
        return ExplorationStep(stay, LOCAL_COMPLETE, vertex_count=len(graph), reason="graph degenerate")
    gains = np.array([volume_gain(vmap, c, depth, box) for c in graph.configs], dtype=float)
    best_gain = float(gains[1:].max())
    if best_gain <= params.gamma_min:
        return ExplorationStep(stay, LOCAL_COMPLETE, best_gain=best_gain, vertex_count=len(graph),
                               reason="gain below threshold", gains=gains)
    sp = shortest_paths(graph, local.root)
    lambdas = np.full(len(graph), -np.inf)
    paths = {}
    for v in range(len(graph)):
        if v == local.root or not sp.reachable(v):
            continue
        path = extract_path(graph, sp, v)
        paths[v] = path
        lambdas[v] = exploration_gain(path, gains[path.vertex_ids], params, direction)
    order = sorted(paths, key=lambda v: (-lambdas[v], sp.dist[v], v))
    best = order[0]
    return ExplorationStep(paths[best], CONTINUE, float(lambdas[best]), best_gain, len(graph), best,
                           gains=gains, lambdas=lambdas)


class ExplorationSession:
    """Exploration of one compartment across repeated steps.

    Tracks the exploration direction estimate and the no-progress guard.
    """

    def __init__(self, params, box, entry, center, depth=None, rng=None):
        self.params = params
        self.box = box
        self.depth = depth or depth_sensor()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        delta = np.asarray(center, dtype=float)[:2] - np.asarray(entry, dtype=float)[:2]
        self.direction = _unit2(delta, params.exploration_direction)
        self.iteration = 0
        self.stalled = 0
        self.records = []
        self._unknown_before = None

    def unknown_count(self, vmap):
        return int(np.count_nonzero(vmap.occupancy[vmap.slices(self.box)] == UNKNOWN))

    def plan(self, vmap, current):
        if self.iteration >= self.params.max_iterations:
            step = ExplorationStep(Path([current]), LOCAL_COMPLETE, reason="iteration cap")
        elif self.stalled >= self.params.no_progress_limit:
            step = ExplorationStep(Path([current]), LOCAL_COMPLETE, reason="no progress")
        else:
            step = plan_exploration_step(vmap, current, self.params, self.box, self.depth, self.rng,
                                         self.direction)
        self.iteration += 1
        self._unknown_before = self.unknown_count(vmap)
        self.records.append(step.record(self.iteration))
        return step

    def executed(self, vmap, path):
        """Update direction and progress bookkeeping after ``path`` was flown."""
        p = path.positions
        if len(p) >= 2 and np.hypot(*(p[-1, :2] - p[0, :2])) > 1e-9:
            self.direction = _unit2(p[-1, :2] - p[0, :2])
        after = self.unknown_count(vmap)
        before = self._unknown_before if self._unknown_before is not None else after
        reduction = before - after
        if before == 0 or reduction < self.params.no_progress_fraction * before:
            self.stalled += 1
        else:
            self.stalled = 0
        return reduction


# -- global graph -----------------------------------------------------------


@dataclass
class GlobalGraph:
    """Sparse roadmap of places the robot has been, used for repositioning."""

    graph: PlanGraph = field(default_factory=PlanGraph)
    spacing: float = 0.5
    radius: float = 1.5


def update_global_graph(global_graph, episode_paths, checker, robot_poses=None):
    """Add executed paths (and an optional pose stream) to the global graph.

    Each path is added as a chain; a waypoint reuses an existing vertex within
    ``spacing`` when the reuse keeps the chain collision-free. Chain edges are
    checked with the path's own clearance box, so a manhole chain is kept even
    though it only fits with the reduced margin. New vertices are then linked
    to earlier vertices within ``radius`` by collision-free edges.
    """
    g = global_graph.graph
    first_new = len(g)
    chains = [(p.positions, p.clearance_box) for p in episode_paths]
    if robot_poses:
        chains.append((np.array([[c.x, c.y, c.z] for c in robot_poses]), None))
    for positions, clearance in chains:
        half = None if clearance is None else np.asarray(clearance, dtype=float) / 2.0
        _add_chain(g, positions, checker, half, global_graph.spacing)
    new_ids = range(first_new, len(g))
    old_ids = range(0, first_new)
    if first_new and len(new_ids):
        g.connect_within(new_ids, global_graph.radius, checker, candidates=old_ids)
    return global_graph


def _add_chain(g, positions, checker, half, spacing):
    prev_v = None
    prev_p = None
    for p in positions:
        v = None
        for c in g.within(p, spacing):
            if c == prev_v or prev_v is None or checker.segment_free(g.configs[prev_v].position, g.configs[c].position, half):
                if checker.segment_free(g.configs[c].position, p, half):
                    v = c
                    break
        if v is None:
            v = g.add_vertex(Configuration.at(p))
            if prev_v is not None and not checker.segment_free(g.configs[prev_v].position, p, half):
                # the reused predecessor does not see p; route through the flown position instead
                w = g.add_vertex(Configuration.at(prev_p))
                g.add_edge(prev_v, w)
                prev_v = w
        if prev_v is not None:
            g.add_edge(prev_v, v)
        prev_v, prev_p = v, p


def plan_repositioning(global_graph, current, target, checker, link_radius=None, reach_target=True):
    """Shortest route over the global graph from ``current`` toward ``target``.

    ``current`` is linked to global vertices (nearest first) by collision-free
    segments. With ``reach_target`` the target point itself is appended when a
    free segment reaches it from a graph vertex; otherwise the route ends at the
    reachable vertex closest to the target.
    """
    cur = current.position if isinstance(current, Configuration) else np.asarray(current, dtype=float)
    tgt = np.asarray(target, dtype=float)[:3]
    psi = current.psi if isinstance(current, Configuration) else 0.0
    start_cfg = Configuration.at(cur, psi)
    if np.linalg.norm(tgt - cur) < 1e-9:
        return Path([start_cfg])
    g = global_graph.graph
    link = link_radius or 2.0 * global_graph.radius
    if checker.segment_free(cur, tgt):
        return _with_headings(Path([start_cfg, Configuration.at(tgt)]))
    if len(g) == 0:
        raise NoGlobalRoute()
    n0 = len(g)
    s = g.add_vertex(start_cfg)
    t = g.add_vertex(Configuration.at(tgt)) if reach_target else None
    try:
        _link(g, s, cur, link, checker, exclude={t})
        if t is not None:
            _link(g, t, tgt, link, checker, exclude={s})
        sp = shortest_paths(g, s)
        if t is not None and sp.reachable(t):
            goal = t
        else:
            reach = [v for v in range(n0) if sp.reachable(v)]
            if not reach:
                raise NoGlobalRoute()
            d = np.linalg.norm(g.positions[reach] - tgt, axis=1)
            goal = reach[int(np.lexsort((reach, d))[0])]
        path = extract_path(g, sp, goal, yaw_along=False)
    finally:
        g.truncate(n0)
    return _with_headings(Path(path.waypoints))


def _link(g, v, point, radius, checker, exclude=()):
    cands = [c for c in g.within(point, radius) if c != v and c not in exclude]
    if not cands:
        return
    ok = checker.segments_free(np.repeat(point[None], len(cands), 0), g.positions[cands])
    for c, free in zip(cands, ok):
        if free:
            g.add_edge(v, c)


def _with_headings(path):
    wps = [path.waypoints[0]]
    for prev, cur in zip(path.waypoints, path.waypoints[1:]):
        wps.append(cur.with_yaw(heading(prev.position, cur.position, wps[-1].psi)))
    return Path(wps, clearance_box=path.clearance_box)


def local_box(center, dims, scale):
    return Box.around(center, np.asarray(dims, dtype=float) * scale)
