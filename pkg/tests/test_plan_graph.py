import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bwtplan.errors import PlannerError, UnsafeStart
from bwtplan.geometry import Box, Configuration
from bwtplan.kernels import OCCUPIED
from bwtplan.plan_graph import (LocalGraphParams, Path, PlanGraph, build_local_graph, extract_path,
                                shortest_paths)
from bwtplan.sensors import CollisionChecker

from conftest import free_map, walled_room
from oracles import all_simple_path_distances


def chain(lengths):
    g = PlanGraph()
    x = 0.0
    g.add_vertex(Configuration(0, 0, 0))
    for length in lengths:
        x += length
        g.add_vertex(Configuration(x, 0, 0))
        g.add_edge(len(g) - 2, len(g) - 1)
    return g


def random_graph(seed, n=15, p=0.25):
    rng = np.random.default_rng(seed)
    g = PlanGraph()
    for q in rng.uniform(0, 5, (n, 3)):
        g.add_vertex(Configuration.at(q))
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                g.add_edge(a, b)
    return g


def test_edges_have_no_loops_or_duplicates():
    g = chain([1.0])
    assert not g.add_edge(0, 0)
    assert not g.add_edge(1, 0)
    assert g.edge_count == 1 and g.adj[0][1] == 1.0


def test_chain_distances_and_path():
    g = chain([1.0, 2.0])
    sp = shortest_paths(g, 0)
    assert sp.dist[2] == 3.0
    path = extract_path(g, sp, 2)
    assert path.vertex_ids == [0, 1, 2]
    assert path.length == 3.0
    single = extract_path(g, sp, 0)
    assert len(single) == 1 and single.length == 0.0


def test_unreachable_flagged():
    g = chain([1.0])
    g.add_vertex(Configuration(9, 9, 9))
    sp = shortest_paths(g, 0)
    assert not sp.reachable(2) and sp.parent[2] == -1
    with pytest.raises(PlannerError):
        extract_path(g, sp, 2)


@pytest.mark.parametrize("seed", range(10))
def test_dijkstra_matches_simple_path_enumeration(seed):
    g = random_graph(seed)
    sp = shortest_paths(g, 0)
    brute = all_simple_path_distances(len(g), list(g.edges()), 0)
    for v in range(len(g)):
        if math.isinf(brute[v]):
            assert not sp.reachable(v)
        else:
            assert abs(sp.dist[v] - brute[v]) < 1e-9
            assert abs(extract_path(g, sp, v).length - sp.dist[v]) < 1e-9


@given(st.integers(0, 10_000))
def test_triangle_inequality(seed):
    g = random_graph(seed, n=12, p=0.3)
    d = np.array([shortest_paths(g, s).dist for s in range(len(g))])
    rng = np.random.default_rng(seed)
    for u, v, w in rng.integers(0, len(g), (50, 3)):
        if np.isfinite(d[u, w]) or (np.isfinite(d[u, v]) and np.isfinite(d[v, w])):
            assert d[u, w] <= d[u, v] + d[v, w] + 1e-9


def test_local_graph_open_box():
    vm = walled_room()
    root = Configuration(1.5, 1.5, 1.0)
    lg = build_local_graph(vm, Box.around((1.5, 1.5, 1.0), (2.6, 2.6, 1.6)), root,
                           LocalGraphParams(vertex_count=60), np.random.default_rng(0))
    g = lg.graph
    print("vertices", len(g), "edges", g.edge_count)
    assert not lg.degenerate and g.edge_count > 0
    assert len(g.component(0)) == len(g)
    checker = CollisionChecker(vm)
    for a, b, length in g.edges():
        assert a != b
        assert abs(length - g.configs[a].distance_to(g.configs[b])) < 1e-12
        assert checker.segment_free(g.configs[a].position, g.configs[b].position)


def test_local_graph_wall_splits_box():
    vm = walled_room((40, 30, 20))
    vm.occupancy[20] = OCCUPIED
    vm._mark_dirty((20, 0, 0, 20, 29, 19))
    root = Configuration(1.0, 1.5, 1.0)
    lg = build_local_graph(vm, vm.bounds, root, LocalGraphParams(vertex_count=120), np.random.default_rng(1))
    xs = lg.graph.positions[:, 0]
    print("discarded", lg.discarded, "kept", len(lg.graph))
    assert lg.discarded > 0
    assert np.all(xs < 2.0)


def test_local_graph_degenerate_and_unsafe():
    vm = walled_room()
    root = Configuration(1.5, 1.5, 1.0)
    lg = build_local_graph(vm, Box.around(root.position, (2.6, 2.6, 1.6)), root,
                           LocalGraphParams(vertex_count=5, edge_radius=0.01), np.random.default_rng(0))
    assert lg.degenerate and len(lg.graph) == 1
    with pytest.raises(UnsafeStart):
        build_local_graph(vm, vm.bounds, Configuration(0.05, 0.05, 0.05))


def test_local_graph_deterministic():
    vm = walled_room()
    root = Configuration(1.5, 1.5, 1.0)
    a = build_local_graph(vm, vm.bounds, root, LocalGraphParams(vertex_count=50), np.random.default_rng(7))
    b = build_local_graph(vm, vm.bounds, root, LocalGraphParams(vertex_count=50), np.random.default_rng(7))
    assert np.array_equal(a.graph.positions, b.graph.positions)
    assert list(a.graph.edges()) == list(b.graph.edges())


def test_truncate_and_subgraph():
    g = random_graph(3, n=8, p=0.5)
    edges_before = {(a, b) for a, b, _ in g.edges() if b < 5}
    g.truncate(5)
    assert len(g) == 5 and {(a, b) for a, b, _ in g.edges()} == edges_before
    sub, remap = g.subgraph([1, 3, 4])
    assert len(sub) == 3 and remap == {1: 0, 3: 1, 4: 2}


def test_within_orders_by_distance_then_id():
    g = PlanGraph()
    for x in (1.0, -1.0, 0.5, 3.0):
        g.add_vertex(Configuration(x, 0, 0))
    assert g.within((0, 0, 0), 1.0) == [2, 0, 1]
    assert g.nearest((2.9, 0, 0)) == 3


def test_path_helpers():
    p = Path([Configuration(0, 0, 0), Configuration(3, 4, 0)], [frozenset(), frozenset({"viewpoint"})])
    q = Path([Configuration(3, 4, 0), Configuration(3, 4, 2)])
    p.extend(q)
    assert len(p) == 3 and p.length == 7.0
    assert p.cumulative().tolist() == [0.0, 5.0, 7.0]
    assert p.indices_tagged("viewpoint") == [1]


def test_dump_format():
    g = chain([1.5])
    buf = io.StringIO()
    g.dump(buf)
    lines = buf.getvalue().splitlines()
    assert lines == ["V 0 0.0000 0.0000 0.0000 0.0000", "V 1 1.5000 0.0000 0.0000 0.0000", "E 0 1 1.500000"]
