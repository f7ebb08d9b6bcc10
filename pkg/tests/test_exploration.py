import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bwtplan import exploration as ex
from bwtplan.errors import NoGlobalRoute
from bwtplan.geometry import Box, Configuration
from bwtplan.kernels import UNKNOWN
from bwtplan.mission import Executor, MissionParams, traverse_manhole
from bwtplan.plan_graph import LocalGraph, Path, PlanGraph
from bwtplan.sensors import CollisionChecker, depth_sensor
from bwtplan.sim_world import generate_tank, truth_map

PARAMS = ex.ExplorationParams(zeta=0.5, mu=0.5)


def line(*xs, axis=0):
    pts = np.zeros((len(xs), 3))
    pts[:, axis] = xs
    return pts


def test_gain_single_vertex_and_straight_leg():
    assert ex.exploration_gain(line(0.0), [100], PARAMS) == 100.0
    lam = ex.exploration_gain(line(0.0, 2.0), [0, 50], PARAMS)
    print("two-vertex gain", lam)
    assert abs(lam - 18.393972058572118) < 1e-12


def test_gain_zeta_dependence():
    bent = line(0.0, 2.0, axis=1)
    z = ex.direction_deviation(bent, (1, 0))
    assert z > 0
    a = ex.exploration_gain(bent, [0, 50], ex.ExplorationParams(zeta=0.5))
    b = ex.exploration_gain(bent, [0, 50], ex.ExplorationParams(zeta=1.0))
    assert b < a
    straight = line(0.0, 2.0)
    assert ex.exploration_gain(straight, [0, 50], ex.ExplorationParams(zeta=0.5)) == \
        ex.exploration_gain(straight, [0, 50], ex.ExplorationParams(zeta=1.0))


def test_direction_deviation_shapes():
    assert ex.direction_deviation(line(0.0), (1, 0)) == 0.0
    assert ex.direction_deviation(line(0.0, 0.0), (1, 0)) == 0.0
    assert abs(ex.direction_deviation(line(0.0, 3.0), (1, 0))) < 1e-12
    # reversed heading: stations sit 2s apart, mean over s = L k / 10
    assert abs(ex.direction_deviation(line(0.0, -1.0), (1, 0)) - 1.1) < 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        ex.ExplorationParams(zeta=0)
    with pytest.raises(ValueError):
        ex.ExplorationParams(mu=-1)
    with pytest.raises(ValueError):
        ex.ExplorationParams(gamma_min=-1)


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_selection_invariant_to_gain_scale(seed, scale):
    rng = np.random.default_rng(seed)
    paths = [np.vstack([[0, 0, 0], np.cumsum(rng.normal(0, 1, (rng.integers(1, 5), 3)), axis=0)])
             for _ in range(6)]
    gains = [rng.integers(0, 200, len(p)).astype(float) for p in paths]
    a = [ex.exploration_gain(p, g, PARAMS) for p, g in zip(paths, gains)]
    b = [ex.exploration_gain(p, g * scale, PARAMS) for p, g in zip(paths, gains)]
    assert int(np.argmax(a)) == int(np.argmax(b))
    assert np.allclose(np.array(b), np.array(a) * scale, rtol=1e-9)


@pytest.fixture(scope="module")
def tank():
    return generate_tank(1, 1, (2.0, 1.8, 1.5), (0.8, 0.6), 0.2, 0)


def test_step_complete_on_mapped_compartment(tank):
    world, spec = tank
    vm = truth_map(world)
    c = spec.compartments[0]
    step = ex.plan_exploration_step(vm, Configuration.at(c.center), PARAMS, c.box.scaled(1.2))
    assert step.status == ex.LOCAL_COMPLETE and step.path.length == 0


def test_step_picks_best_path_toward_pocket(tank):
    world, spec = tank
    vm = truth_map(world)
    c = spec.compartments[0]
    pocket = vm.slices(Box((1.6, 0.3, 0.3), (2.1, 0.8, 0.8)))
    vm.occupancy[pocket] = np.where(vm.occupancy[pocket] == 1, UNKNOWN, vm.occupancy[pocket])
    params = ex.ExplorationParams(vertex_count=80, gamma_min=5)
    step = ex.plan_exploration_step(vm, Configuration.at(c.center), params, c.box.scaled(1.2),
                                    rng=np.random.default_rng(0))
    print("status", step.status, "best", step.best_lambda, "gain at target", step.gains[step.target])
    assert step.status == ex.CONTINUE
    finite = step.lambdas[np.isfinite(step.lambdas)]
    assert step.best_lambda == finite.max()
    assert step.gains[step.target] > 0
    again = ex.exploration_gain(step.path, step.gains[step.path.vertex_ids], params)
    assert abs(again - step.best_lambda) < 1e-12


def test_step_tie_breaks_by_vertex_id(monkeypatch):
    g = PlanGraph()
    g.add_vertex(Configuration(0, 0, 0), {"root"})
    g.add_vertex(Configuration(1, 0, 0))
    g.add_vertex(Configuration(-1, 0, 0))
    g.add_edge(0, 1)
    g.add_edge(0, 2)
    monkeypatch.setattr(ex, "build_local_graph", lambda *a, **k: LocalGraph(g, 0, False))
    monkeypatch.setattr(ex, "volume_gain", lambda vm, c, *a, **k: 0 if c.x == 0 else 50)
    params = ex.ExplorationParams(exploration_direction=(0.0, 1.0))
    step = ex.plan_exploration_step(None, Configuration(0, 0, 0), params, None)
    assert step.lambdas[1] == step.lambdas[2]
    assert step.target == 1


def test_session_no_progress_guard():
    params = ex.ExplorationParams()
    s = ex.ExplorationSession(params, Box((0, 0, 0), (1, 1, 1)), (0, 0, 0), (1, 0, 0))
    vm = truth_map(generate_tank(1, 1, (2.0, 1.8, 1.5), (0.8, 0.6))[0])
    for _ in range(params.no_progress_limit):
        s._unknown_before = s.unknown_count(vm)
        s.executed(vm, Path([Configuration(0, 0, 0), Configuration(1, 0, 0)]))
    step = s.plan(vm, Configuration(0.5, 0.5, 0.5))
    assert step.status == ex.LOCAL_COMPLETE and step.reason == "no progress"


def test_exploration_progress_on_static_world(tank):
    world, spec = tank
    params = MissionParams()
    vm = world.new_map(0.1)
    exe = Executor(world, vm, params)
    c = spec.compartments[0]
    robot = Configuration.at(c.center)
    vm.clear_box(robot.position, params.robot_box)
    exe.sense(robot, 1)
    session = ex.ExplorationSession(params.exploration, c.box.scaled(1.2), c.center, c.center, params.depth,
                                    np.random.default_rng(0))
    no_progress = 0
    for _ in range(12):
        before = session.unknown_count(vm)
        step = session.plan(vm, robot)
        if step.status == ex.LOCAL_COMPLETE:
            break
        exe.fly(step.path.waypoints, 1)
        robot = step.path.waypoints[-1]
        session.executed(vm, step.path)
        after = session.unknown_count(vm)
        no_progress = no_progress + 1 if after >= before else 0
        assert no_progress <= 3
    assert step.status == ex.LOCAL_COMPLETE
    print("records", session.records[-1])


def test_global_graph_from_one_path():
    vm = truth_map(generate_tank(1, 1, (2.0, 1.8, 1.5), (0.8, 0.6))[0])
    checker = CollisionChecker(vm)
    gg = ex.GlobalGraph()
    pts = [(0.6, 0.6, 0.9), (1.4, 0.6, 0.9), (1.4, 1.4, 0.9)]
    ex.update_global_graph(gg, [Path([Configuration.at(p) for p in pts])], checker)
    assert np.allclose(gg.graph.positions, pts)
    assert sorted((a, b) for a, b, _ in gg.graph.edges()) == [(0, 1), (1, 2)]


def test_global_graph_pose_stream_subsampled():
    vm = truth_map(generate_tank(1, 1, (2.0, 1.8, 1.5), (0.8, 0.6))[0])
    gg = ex.GlobalGraph()
    poses = [Configuration(1.0, 1.0, 0.9)] * 20 + [Configuration(1.0 + 0.05 * k, 1.0, 0.9) for k in range(11)]
    ex.update_global_graph(gg, [], CollisionChecker(vm), robot_poses=poses)
    print("vertices for 0.5 m of poses", len(gg.graph))
    assert len(gg.graph) <= 2


@pytest.fixture(scope="module")
def two_rooms():
    world, spec = generate_tank(1, 2, (2.0, 1.8, 1.5), (0.8, 0.6), 0.2, 0)
    vm = truth_map(world)
    gg = ex.GlobalGraph()
    checker = CollisionChecker(vm)
    m = spec.manholes[0]
    a, b = (np.array(c.center) for c in spec.compartments)
    front = np.array(m.center) + 0.6 * m.side_normal(0)
    rear = np.array(m.center) - 0.6 * m.side_normal(0)
    ex.update_global_graph(gg, [Path([Configuration.at(a), Configuration.at(front)])], checker)
    crossing = traverse_manhole(Configuration.at(front), m, 0, (0.4, 0.4, 0.3), vm)
    ex.update_global_graph(gg, [crossing], CollisionChecker(vm, crossing.clearance_box))
    ex.update_global_graph(gg, [Path([Configuration.at(rear), Configuration.at(b)])], checker)
    return vm, spec, gg, checker


def test_repositioning_trivial_and_direct(two_rooms):
    vm, spec, gg, checker = two_rooms
    here = Configuration.at(spec.compartments[0].center)
    assert len(ex.plan_repositioning(gg, here, here.position, checker)) == 1
    p = ex.plan_repositioning(gg, here, here.position + (0.3, 0.2, 0.0), checker)
    assert len(p) == 2


def _polyline_distance(pts, q):
    best = np.inf
    for a, b in zip(pts, pts[1:]):
        t = np.clip(np.dot(q - a, b - a) / max(np.dot(b - a, b - a), 1e-300), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(a + t * (b - a) - q)))
    return best


def test_repositioning_routes_through_manhole(two_rooms):
    vm, spec, gg, checker = two_rooms
    start = Configuration(0.7, 0.5, 0.6)
    goal = np.array([3.9, 0.5, 1.3])
    assert not checker.segment_free(start.position, goal)
    path = ex.plan_repositioning(gg, start, goal, checker)
    m = np.array(spec.manholes[0].center)
    d = _polyline_distance(path.positions, m)
    print("waypoints", len(path), "route distance to manhole centre", d)
    assert d < 1e-9
    assert np.allclose(path.positions[-1], goal)
    assert np.allclose(path.positions[0], start.position)


def test_repositioning_disconnected_target():
    world, spec = generate_tank(1, 2, (2.0, 1.8, 1.5), (0.8, 0.6), 0.2, 0)
    vm = truth_map(world)
    m = spec.manholes[0]
    vm.occupancy[vm.slices(Box.around(m.center, (0.4, m.width + 0.2, m.height + 0.2)))] = 2  # seal the opening
    checker = CollisionChecker(vm)
    gg = ex.GlobalGraph()
    ex.update_global_graph(gg, [Path([Configuration(0.6, 0.6, 0.9), Configuration(1.6, 0.6, 0.9)])], checker)
    before = len(gg.graph)
    with pytest.raises(NoGlobalRoute):
        ex.plan_repositioning(gg, Configuration(3.5, 1.0, 0.9), spec.compartments[0].center, checker)
    assert len(gg.graph) == before
    with pytest.raises(NoGlobalRoute):
        ex.plan_repositioning(ex.GlobalGraph(), Configuration(1.0, 1.0, 0.9), (3.5, 1.0, 0.9), checker)
