"""Mission state machine: explore and inspect one compartment at a time, move
through manholes, and return to the start compartment."""
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ManholeInfeasible, PathCollision, PlannerError
from .exploration import (LOCAL_COMPLETE, ExplorationParams, ExplorationSession, GlobalGraph, local_box,
                          plan_repositioning, update_global_graph)
from .geometry import Box, Configuration, heading
from .gvi import VIEWPOINT, GviParams, plan_inspection
from .plan_graph import Path
from .sensors import DEFAULT_ROBOT_BOX, CollisionChecker, camera_sensor, depth_sensor

VE = "VE"
GVI = "GVI"
TRANSIT = "Transit"
MANHOLE = "ManholeTraversal"
RETURN_HOME = "ReturnHome"
DONE = "Done"
MODES = (VE, GVI, TRANSIT, MANHOLE, RETURN_HOME, DONE)

ALLOWED = {
    VE: {VE, GVI},
    GVI: {VE, TRANSIT},
    TRANSIT: {MANHOLE, VE},
    MANHOLE: {VE},
    RETURN_HOME: {DONE},
    DONE: set(),
}

# seen-byte flags for camera coverage
SEEN_OTHER = 1
SEEN_GVI = 2


def transition_allowed(src, dst):
    if dst == RETURN_HOME:
        return src not in (RETURN_HOME, DONE)
    return dst in ALLOWED[src]


@dataclass
class MissionParams:
    resolution: float = 0.1
    depth_range: float = 10.0
    depth_fov: tuple = (360.0, 90.0)
    gain_ray_resolution: float = 3.0
    scan_resolution: float = 1.5
    camera_range: float = 3.0
    camera_fov: tuple = (85.0, 64.0)
    robot_box: tuple = DEFAULT_ROBOT_BOX
    speed: float = 1.0
    rate_hz: float = 10.0
    manhole_standoff: float = 0.6
    noise_sigma: float = 0.0
    seed: int = 0
    exploration: ExplorationParams = field(default_factory=ExplorationParams)
    gvi: GviParams = field(default_factory=GviParams)

    @property
    def depth(self):
        return depth_sensor(self.depth_range, self.depth_fov, self.gain_ray_resolution)

    @property
    def camera(self):
        return camera_sensor(self.camera_range, self.camera_fov)


@dataclass
class MissionState:
    mode: str
    current_compartment: int
    robot: Configuration
    visited: set = field(default_factory=set)
    elapsed: float = 0.0
    events: list = field(default_factory=list)
    budget_exceeded: bool = False
    aborted: bool = False
    failure: str = ""
    path_length: float = 0.0
    target_compartment: int = None
    target_manhole: int = None


@dataclass
class Waypoint:
    t: float
    config: Configuration
    path_id: int
    kind: str


class Executor:
    """Simulated flight along waypoints with depth scans and camera marks every
    ``speed / rate`` meters."""

    def __init__(self, world, vmap, params):
        self.world = world
        self.vmap = vmap
        self.params = params
        self.depth = params.depth
        self.camera = params.camera
        self.rng = np.random.default_rng(params.seed + 7919)

    def sense(self, pose, flag):
        self.world.scan(self.vmap, pose, self.depth, self.params.scan_resolution, self.params.noise_sigma, self.rng)
        self.vmap.mark_camera_coverage(pose, self.camera, flag=flag)

    def fly(self, waypoints, flag, check_box=None):
        """Move through ``waypoints`` (the first is the current pose). Returns the distance flown.

        Each waypoint is checked against the map as it stands when the robot
        sets off toward it.
        """
        step = self.params.speed / self.params.rate_hz
        flown = 0.0
        for prev, wp in zip(waypoints, waypoints[1:]):
            if check_box is not None and not self.vmap.box_free(wp.position, check_box):
                raise PathCollision(f"waypoint ({wp.x:.3f}, {wp.y:.3f}, {wp.z:.3f}) in collision")
            a, b = prev.position, wp.position
            length = float(np.linalg.norm(b - a))
            n = max(1, math.ceil(length / step - 1e-9))
            yaw = heading(a, b, prev.psi)
            for k in range(1, n + 1):
                if k == n:
                    pose = wp
                else:
                    pose = Configuration.at(a + (b - a) * (k / n), yaw)
                self.sense(pose, flag)
            flown += length
        return flown


class Mission:
    def __init__(self, world, spec, params=None):
        self.world = world
        self.spec = spec
        self.params = params or MissionParams()
        p = self.params
        self.vmap = world.new_map(p.resolution)
        self.executor = Executor(world, self.vmap, p)
        self.rng = np.random.default_rng(p.seed)
        start = spec.compartment(spec.start_compartment)
        self.home = np.array(start.center, dtype=float)
        self.state = MissionState(VE, spec.start_compartment, Configuration.at(self.home))
        self.global_graph = GlobalGraph(radius=p.exploration.edge_radius)
        self.session = None
        self.waypoints = []
        self.path_id = 0
        self.gvi_reports = []
        self.ve_records = []
        self.entry_point = self.home.copy()

    # -- logging ------------------------------------------------------------

    def log(self, event, detail=""):
        s = self.state
        s.events.append(f"{s.elapsed:.3f} {s.mode} {event} {detail}".rstrip())

    def enter(self, mode, detail=""):
        s = self.state
        if not transition_allowed(s.mode, mode):
            raise RuntimeError(f"illegal transition {s.mode} -> {mode}")
        prev = s.mode
        s.mode = mode
        self.log("enter", f"from={prev}" + (f" {detail}" if detail else ""))

    # -- motion -------------------------------------------------------------

    def execute_path(self, path, kind):
        """Fly ``path`` and record its waypoints; elapsed time advances by length / speed."""
        s = self.state
        self.path_id += 1
        flag = SEEN_GVI if kind.startswith(GVI) else SEEN_OTHER
        box = path.clearance_box or self.params.robot_box
        t0 = s.elapsed
        cum = path.cumulative()
        wps = path.waypoints
        for k, (wp, tags) in enumerate(zip(wps, path.tags)):
            label = kind + (":" + VIEWPOINT if VIEWPOINT in tags else "")
            self.waypoints.append(Waypoint(t0 + cum[k] / self.params.speed, wp, self.path_id, label))
        flown = self.executor.fly(wps, flag, box)
        s.elapsed = t0 + flown / self.params.speed
        s.path_length += flown
        s.robot = wps[-1]
        if len(wps) > 1:
            update_global_graph(self.global_graph, [path], self._checker(path.clearance_box))
        return flown

    def _checker(self, box=None):
        return CollisionChecker(self.vmap, box or self.params.robot_box)

    # -- mission loop -------------------------------------------------------

    def start(self):
        s = self.state
        self.vmap.clear_box(s.robot.position, self.params.robot_box)
        self.executor.sense(s.robot, SEEN_OTHER)
        self.waypoints.append(Waypoint(0.0, s.robot, 0, "start"))
        self.global_graph.graph.add_vertex(s.robot, {"home"})
        self.log("start", f"compartment={s.current_compartment}")

    def run(self, max_steps=100000):
        if not self.state.events:
            self.start()
        steps = 0
        while self.state.mode != DONE and steps < max_steps:
            self.step()
            steps += 1
        return self.state

    def step(self):
        s = self.state
        if s.mode == DONE:
            raise RuntimeError("mission already done")
        if s.mode not in (RETURN_HOME,) and s.elapsed > self.spec.time_budget:
            s.budget_exceeded = True
            self.enter(RETURN_HOME, "reason=budget")
            return s
        try:
            {VE: self._step_ve, GVI: self._step_gvi, TRANSIT: self._step_transit, MANHOLE: self._step_manhole,
             RETURN_HOME: self._step_return}[s.mode]()
        except PlannerError as exc:
            if s.mode == RETURN_HOME:
                s.aborted = True
                s.failure = s.failure or str(exc)
                self.log("abort", f"error={type(exc).__name__} msg={_token(str(exc))}")
                self.enter(DONE, "result=failed")
            else:
                s.aborted = True
                s.failure = str(exc)
                self.log("abort", f"error={type(exc).__name__} msg={_token(str(exc))}")
                self.enter(RETURN_HOME, "reason=abort")
        return s

    def _compartment_box(self, cid, scale):
        c = self.spec.compartment(cid)
        return local_box(c.center, c.dims, scale)

    def _step_ve(self):
        s = self.state
        p = self.params
        if self.session is None:
            c = self.spec.compartment(s.current_compartment)
            box = self._compartment_box(s.current_compartment, p.exploration.local_box_scale)
            self.session = ExplorationSession(p.exploration, box, self.entry_point, c.center, p.depth, self.rng)
        step = self.session.plan(self.vmap, s.robot)
        rec = dict(step.record(self.session.iteration), compartment=s.current_compartment)
        self.ve_records.append(rec)
        if step.status == LOCAL_COMPLETE:
            self.log("local_complete", f"iteration={self.session.iteration} reason={_token(step.reason)}")
            self.session = None
            self.enter(GVI, f"compartment={s.current_compartment}")
            return
        flown = self.execute_path(step.path, VE)
        self.session.executed(self.vmap, step.path)
        self.log("path", f"iteration={self.session.iteration} vertices={step.vertex_count} "
                         f"gain={step.best_gain:.0f} score={step.best_lambda:.3f} length={flown:.3f}")
        self.enter(VE)

    def _step_gvi(self):
        s = self.state
        p = self.params
        box = self._compartment_box(s.current_compartment, p.gvi.box_scale)
        path, report = plan_inspection(self.vmap, s.robot, box, p.gvi, p.camera, self.rng,
                                       seed=p.seed + s.current_compartment)
        flown = self.execute_path(path, GVI)
        rec = dict(report.as_dict(), compartment=s.current_compartment, path_id=self.path_id)
        self.gvi_reports.append(rec)
        s.visited.add(s.current_compartment)
        self.log("inspected", f"compartment={s.current_compartment} selected={report.selected} "
                              f"viewpoints={report.viewpoints_generated} length={flown:.3f}")
        if len(s.visited) == len(self.spec.compartments):
            self.enter(RETURN_HOME, "reason=complete")
        else:
            self.enter(TRANSIT)

    def next_compartment(self):
        """Closest unvisited compartment, then the first unvisited hop toward it."""
        s = self.state
        here = np.array(self.spec.compartment(s.current_compartment).center)
        unvisited = [c for c in self.spec.compartments if c.id not in s.visited and c.id != s.current_compartment]
        if not unvisited:
            return None
        target = min(unvisited, key=lambda c: (float(np.linalg.norm(np.array(c.center) - here)), c.id)).id
        route = self._route(s.current_compartment, target)
        if route is None:
            raise PlannerError(f"compartment {target} not connected")
        for cid in route[1:]:
            if cid not in s.visited:
                return cid
        return target

    def _route(self, src, dst):
        prev = {src: None}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            if v == dst:
                break
            for w in self.spec.neighbors(v):
                if w not in prev:
                    prev[w] = v
                    queue.append(w)
        if dst not in prev:
            return None
        out = [dst]
        while prev[out[-1]] is not None:
            out.append(prev[out[-1]])
        return out[::-1]

    def choose_manhole(self, target):
        """Manhole into ``target`` from a visited compartment: closest to the target
        centre, then closest to the robot, then lowest index."""
        s = self.state
        cands = [k for k in self.spec.manholes_of(target) if self.spec.manholes[k].other(target) in s.visited]
        if not cands:
            return None
        tc = np.array(self.spec.compartment(target).center)
        rp = s.robot.position

        def key(k):
            c = np.array(self.spec.manholes[k].center)
            return (round(float(np.linalg.norm(c - tc)), 9), round(float(np.linalg.norm(c - rp)), 9), k)

        return min(cands, key=key)

    def _step_transit(self):
        s = self.state
        target = self.next_compartment()
        k = self.choose_manhole(target)
        s.target_compartment = target
        if k is None:
            c = self.spec.compartment(target)
            path = plan_repositioning(self.global_graph, s.robot, c.center, self._checker())
            self.execute_path(path, TRANSIT)
            s.current_compartment = target
            self.entry_point = s.robot.position
            self.enter(VE, f"compartment={target}")
            return
        m = self.spec.manholes[k]
        side = m.other(target)
        front = np.array(m.center) + self.params.manhole_standoff * m.side_normal(side)
        path = plan_repositioning(self.global_graph, s.robot, front, self._checker())
        flown = self.execute_path(path, TRANSIT)
        self.log("reposition", f"manhole={k} target={target} length={flown:.3f}")
        s.target_manhole = k
        self.enter(MANHOLE, f"manhole={k} target={target}")

    def _step_manhole(self):
        s = self.state
        k = s.target_manhole
        m = self.spec.manholes[k]
        target = s.target_compartment
        path = traverse_manhole(s.robot, m, m.other(target), self.params.robot_box, self.vmap,
                                self.params.manhole_standoff)
        if s.robot.distance_to(path.waypoints[0]) > 1e-9:
            path = Path([s.robot] + path.waypoints, clearance_box=path.clearance_box)
        self.execute_path(path, MANHOLE)
        s.current_compartment = target
        self.entry_point = s.robot.position
        self.log("traversed", f"manhole={k} compartment={target}")
        self.enter(VE, f"compartment={target}")

    def _step_return(self):
        s = self.state
        path = plan_repositioning(self.global_graph, s.robot, self.home, self._checker())
        flown = self.execute_path(path, RETURN_HOME)
        dist = float(np.linalg.norm(s.robot.position - self.home))
        self.log("home", f"length={flown:.3f} distance={dist:.3f}")
        self.enter(DONE, "result=" + ("failed" if s.aborted else "ok"))


def _token(text):
    return "_".join(str(text).split()) or "-"


def traverse_manhole(robot, manhole, from_compartment, robot_box, vmap=None, standoff=0.6, reach=2.0):
    """Front standoff, centre and rear standoff of a manhole as a three-waypoint path.

    Waypoints are checked against ``vmap`` (when given) with the robot box
    narrowed by half a voxel along the opening's width.
    """
    n = manhole.side_normal(from_compartment)
    axis = int(np.argmax(np.abs(n)))
    lateral = 1 - axis if axis < 2 else 0
    box = np.asarray(robot_box, dtype=float)
    if manhole.width <= box[lateral] or manhole.height <= box[2]:
        raise ManholeInfeasible()
    c = np.asarray(manhole.center, dtype=float)
    front, rear = c + standoff * n, c - standoff * n
    pos = robot.position if isinstance(robot, Configuration) else np.asarray(robot, dtype=float)
    if np.linalg.norm(pos - front) > reach:
        raise PlannerError(f"robot is {np.linalg.norm(pos - front):.2f} m from the manhole front")
    yaw = heading(front, rear)
    wps = [Configuration.at(front, yaw), Configuration.at(c, yaw), Configuration.at(rear, yaw)]
    clearance = box.copy()
    if vmap is not None:
        clearance[lateral] -= vmap.resolution / 2.0
        for wp in wps:
            if not vmap.box_free(wp.position, clearance):
                raise PathCollision(f"manhole waypoint ({wp.x:.3f}, {wp.y:.3f}, {wp.z:.3f}) in collision")
    return Path(wps, clearance_box=tuple(float(v) for v in clearance))


def check_transitions(events):
    """Replay ``enter`` events through the mode automaton; returns a list of violations."""
    bad = []
    mode = VE
    for line in events:
        parts = line.split()
        if len(parts) >= 3 and parts[2] == "enter":
            new = parts[1]
            if new not in MODES or not transition_allowed(mode, new):
                bad.append(f"{mode} -> {new}")
            mode = new
    if mode != DONE:
        bad.append(f"ended in {mode}")
    return bad
