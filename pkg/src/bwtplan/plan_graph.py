"""Sampled configuration graphs and shortest paths.

One :class:`PlanGraph` type serves the local exploration graph, the global
repositioning graph and the inspection graph.
"""
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PlannerError, UnsafeStart
from .geometry import Configuration, heading
from .sensors import CollisionChecker


class PlanGraph:
    """Undirected graph of configurations with Euclidean edge lengths."""

    def __init__(self):
        self.configs = []
        self.tags = []
        self.adj = []
        self._pos = np.zeros((16, 3))

    def __len__(self):
        return len(self.configs)

    @property
    def positions(self):
        return self._pos[: len(self.configs)]

    def add_vertex(self, config, tags=()):
        n = len(self.configs)
        if n == len(self._pos):
            self._pos = np.concatenate([self._pos, np.zeros_like(self._pos)])
        self._pos[n] = (config.x, config.y, config.z)
        self.configs.append(config)
        self.tags.append(set(tags))
        self.adj.append({})
        return len(self.configs) - 1

    def add_edge(self, a, b):
        """Add an undirected edge; self-loops and duplicates are ignored. Returns True if added."""
        if a == b or b in self.adj[a]:
            return False
        length = self.configs[a].distance_to(self.configs[b])
        self.adj[a][b] = length
        self.adj[b][a] = length
        return True

    def truncate(self, n):
        """Remove every vertex with id >= ``n`` together with its edges."""
        for v in range(n, len(self.configs)):
            for w in self.adj[v]:
                if w < n:
                    del self.adj[w][v]
        del self.configs[n:], self.tags[n:], self.adj[n:]

    def has_edge(self, a, b):
        return b in self.adj[a]

    def edges(self):
        for a, nbrs in enumerate(self.adj):
            for b, length in nbrs.items():
                if a < b:
                    yield a, b, length

    @property
    def edge_count(self):
        return sum(len(n) for n in self.adj) // 2

    def within(self, point, radius):
        """Vertex ids within ``radius`` of ``point``, nearest first (ties by id)."""
        if not self.configs:
            return []
        d = np.linalg.norm(self.positions - np.asarray(point, dtype=float)[:3], axis=1)
        ids = np.flatnonzero(d <= radius)
        return [int(i) for i in ids[np.lexsort((ids, d[ids]))]]

    def nearest(self, point):
        d = np.linalg.norm(self.positions - np.asarray(point, dtype=float)[:3], axis=1)
        return int(np.argmin(d))

    def component(self, root):
        seen = {root}
        stack = [root]
        while stack:
            v = stack.pop()
            for w in self.adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def subgraph(self, keep):
        """Induced subgraph on ``keep`` (sorted); returns ``(graph, old_to_new)``."""
        keep = sorted(keep)
        remap = {old: new for new, old in enumerate(keep)}
        g = PlanGraph()
        for old in keep:
            g.add_vertex(self.configs[old], self.tags[old])
        for old in keep:
            for w, length in self.adj[old].items():
                if w in remap and remap[old] < remap[w]:
                    g.adj[remap[old]][remap[w]] = length
                    g.adj[remap[w]][remap[old]] = length
        return g, remap

    def connect_within(self, new_ids, radius, checker, candidates=None, half=None):
        """Connect each vertex in ``new_ids`` to others within ``radius`` by collision-free edges."""
        pos = self.positions
        pairs = []
        cand = None if candidates is None else np.asarray(sorted(candidates), dtype=int)
        for v in new_ids:
            pool = np.arange(len(pos)) if cand is None else cand
            d = np.linalg.norm(pos[pool] - pos[v], axis=1)
            for w in pool[(d <= radius) & (pool != v)]:
                w = int(w)
                if not self.has_edge(v, w):
                    pairs.append((min(v, w), max(v, w)))
        pairs = sorted(set(pairs))
        if not pairs:
            return 0
        p = np.array(pairs)
        ok = checker.segments_free(pos[p[:, 0]], pos[p[:, 1]], half)
        added = 0
        for (a, b), free in zip(pairs, ok):
            if free:
                added += self.add_edge(a, b)
        return added

    def dump(self, stream):
        for i, c in enumerate(self.configs):
            stream.write(f"V {i} {c.x:.4f} {c.y:.4f} {c.z:.4f} {c.psi:.4f}\n")
        for a, b, length in self.edges():
            stream.write(f"E {a} {b} {length:.6f}\n")


@dataclass
class Path:
    """Ordered waypoints; ``tags[i]`` labels waypoint ``i`` (e.g. ``"viewpoint"``)."""

    waypoints: list
    tags: list = None
    clearance_box: tuple = None  # robot box override for execution checks

    def __post_init__(self):
        if self.tags is None:
            self.tags = [frozenset() for _ in self.waypoints]

    def __len__(self):
        return len(self.waypoints)

    @property
    def positions(self):
        return np.array([[c.x, c.y, c.z] for c in self.waypoints]).reshape(-1, 3)

    @property
    def length(self):
        p = self.positions
        if len(p) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())

    def cumulative(self):
        """Cumulative arc length at each waypoint."""
        p = self.positions
        if len(p) == 0:
            return np.zeros(0)
        return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])

    def indices_tagged(self, tag):
        return [i for i, t in enumerate(self.tags) if tag in t]

    def extend(self, other):
        """Append ``other``, dropping its first waypoint when it repeats our last one."""
        wps, tags = list(other.waypoints), list(other.tags)
        if self.waypoints and wps and self.waypoints[-1].distance_to(wps[0]) < 1e-9:
            self.tags[-1] = frozenset(self.tags[-1] | tags[0])
            wps, tags = wps[1:], tags[1:]
        self.waypoints.extend(wps)
        self.tags.extend(tags)


@dataclass
class ShortestPaths:
    source: int
    dist: np.ndarray
    parent: np.ndarray

    def reachable(self, v):
        return bool(np.isfinite(self.dist[v]))


def shortest_paths(graph, source):
    """Dijkstra from ``source``; unreachable vertices have ``dist = inf`` and parent ``-1``."""
    n = len(graph)
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for w, length in graph.adj[v].items():
            nd = d + length
            if nd < dist[w] or (nd == dist[w] and v < parent[w] and not done[w]):
                dist[w] = nd
                parent[w] = v
                heapq.heappush(heap, (nd, w))
    return ShortestPaths(source, dist, parent)


def extract_path(graph, sp, target, yaw_along=True):
    """Waypoints from ``sp.source`` to ``target`` following parent pointers.

    With ``yaw_along`` every waypoint after the first is given the heading of
    the segment arriving at it.
    """
    if not sp.reachable(target):
        raise PlannerError(f"vertex {target} unreachable from {sp.source}")
    ids = [target]
    while ids[-1] != sp.source:
        ids.append(int(sp.parent[ids[-1]]))
    ids.reverse()
    wps = [graph.configs[ids[0]]]
    for prev, cur in zip(ids, ids[1:]):
        c = graph.configs[cur]
        if yaw_along:
            c = c.with_yaw(heading(graph.configs[prev].position, c.position, wps[-1].psi))
        wps.append(c)
    path = Path(wps)
    path.vertex_ids = ids
    return path


@dataclass
class LocalGraphParams:
    vertex_count: int = 200
    edge_radius: float = 1.5
    robot_box: tuple = (0.4, 0.4, 0.3)
    max_attempts_factor: int = 30


@dataclass
class LocalGraph:
    graph: PlanGraph
    root: int
    degenerate: bool
    sampled: int = 0
    discarded: int = 0
    extra: dict = field(default_factory=dict)


def sample_free(box_lo, box_hi, count, checker, rng, max_attempts):
    """Up to ``count`` uniformly sampled collision-free positions in the box."""
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    found = []
    attempts = 0
    batch = max(64, count)
    while len(found) < count and attempts < max_attempts:
        pts = lo + rng.random((batch, 3)) * (hi - lo)
        attempts += batch
        ok = checker.boxes_free(pts)
        found.extend(pts[ok][: count - len(found)])
    return np.array(found).reshape(-1, 3)


def build_local_graph(vmap, box, root, params=None, rng=None, checker=None):
    """Random roadmap in ``box`` rooted at configuration ``root``.

    The result is restricted to the root's connected component; it is flagged
    degenerate when that component has fewer than two vertices.
    """
    params = params or LocalGraphParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    checker = checker or CollisionChecker(vmap, params.robot_box)
    if not checker.is_free(root.position):
        raise UnsafeStart()
    clip = box.intersect(vmap.bounds)
    graph = PlanGraph()
    graph.add_vertex(root, {"root"})
    pts = np.zeros((0, 3))
    if clip is not None:
        pts = sample_free(clip.lo, clip.hi, params.vertex_count, checker, rng,
                          params.vertex_count * params.max_attempts_factor)
    for p in pts:
        graph.add_vertex(Configuration.at(p))
    graph.connect_within(range(len(graph)), params.edge_radius, checker)
    comp = graph.component(0)
    sub, _ = graph.subgraph(comp)
    return LocalGraph(sub, 0, len(sub) < 2, sampled=len(pts), discarded=len(graph) - len(sub))
