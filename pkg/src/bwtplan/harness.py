"""Reproducible mission runs: artifact bundles, metrics and replay verification."""
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .geometry import Configuration
from .mission import DONE, GVI, SEEN_OTHER, Executor, Mission, check_transitions
from .sim_world import generate_tank
from .voxel_map import format_percent, write_map

BUNDLE_FILES = ("config.json", "events.log", "map.txt", "path.txt", "gvi_reports.json", "ve_steps.jsonl",
                "metrics.json")


class BundleError(ValueError):
    """An artifact bundle is missing, truncated or malformed."""

    def __init__(self, file, line, message):
        super().__init__(f"{file}:{line}: {message}")
        self.file = file
        self.line = line


def build_world(cfg):
    s = cfg.scenario
    return generate_tank(s.rows, s.cols, s.comp_dims, s.manhole_dims, s.wall_thickness, s.seed,
                         cfg.planner.resolution, s.randomize_manholes, s.clutter, s.time_budget)


def _esdf_cap(cfg):
    return max(2.0, cfg.planner.gvi.delta_max + 1.0)


@dataclass
class RunResult:
    exit_code: int
    bundle: str
    metrics: dict
    mission: Mission = field(repr=False, default=None)


def compute_metrics(mission, cfg):
    vmap = mission.vmap
    s = mission.state
    total = vmap.coverage_stats()
    before = vmap.coverage_stats(flag=SEEN_OTHER)
    return {
        "V_E_tot_m3": round(total.V_tot, 3),
        "S_C_tot_m2": round(total.S_tot, 2),
        "lambda_C_percent": format_percent(total.lambda_C),
        "lambda_C_without_gvi_percent": format_percent(before.lambda_C),
        "delta_max_m": cfg.planner.gvi.delta_max,
        "duration_s": round(s.elapsed, 3),
        "path_length_m": round(s.path_length, 3),
        "compartments_total": len(mission.spec.compartments),
        "compartments_visited": len(s.visited),
        "status": "done" if s.mode == DONE and not s.aborted else ("aborted" if s.aborted else s.mode),
        "budget_exceeded": s.budget_exceeded,
        "surface_voxels": total.surface_voxels,
        "seen_surface_voxels": total.seen_surface_voxels,
    }


def run_mission(cfg, out_dir=None, keep_mission=False):
    """Run one mission and write its artifact bundle. Returns a :class:`RunResult`."""
    out = out_dir or cfg.output
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as fh:
        fh.write(cfgmod.dumps(cfg))
    world, spec = build_world(cfg)
    mission = Mission(world, spec, cfg.planner)
    mission.vmap.esdf_cap = _esdf_cap(cfg)
    mission.start()
    deadline = time.monotonic() + cfg.wall_time_cap
    while mission.state.mode != DONE:
        if time.monotonic() > deadline and not mission.state.aborted:
            mission.state.aborted = True
            mission.state.failure = "wall time cap"
            mission.log("abort", "error=WallTimeCap")
            if mission.state.mode != "ReturnHome":
                mission.enter("ReturnHome", "reason=abort")
        mission.step()
    metrics = compute_metrics(mission, cfg)
    _write_bundle(out, mission, metrics)
    code = 0 if metrics["status"] == "done" else 1
    return RunResult(code, out, metrics, mission if keep_mission else None)


def _write_bundle(out, mission, metrics):
    with open(os.path.join(out, "events.log"), "w") as fh:
        fh.write("\n".join(mission.state.events) + "\n")
    with open(os.path.join(out, "map.txt"), "w") as fh:
        write_map(mission.vmap, fh)
    with open(os.path.join(out, "path.txt"), "w") as fh:
        fh.write("# t x y z psi path_id kind\n")
        for w in mission.waypoints:
            c = w.config
            fh.write(f"{float(w.t)!r} {c.x!r} {c.y!r} {c.z!r} {c.psi!r} {w.path_id} {w.kind}\n")
    with open(os.path.join(out, "gvi_reports.json"), "w") as fh:
        json.dump(mission.gvi_reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "ve_steps.jsonl"), "w") as fh:
        for rec in mission.ve_records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        fh.write(metrics_text(metrics))


def metrics_text(metrics):
    return json.dumps(metrics, indent=2, sort_keys=True) + "\n"


# -- replay ---------------------------------------------------------------------


def read_path_file(path):
    """Parse ``path.txt`` into a list of ``(t, Configuration, path_id, kind)``."""
    rows = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 7:
                raise BundleError("path.txt", n, f"expected 7 fields, found {len(parts)}")
            try:
                t, x, y, z, psi = (float(v) for v in parts[:5])
                pid = int(parts[5])
            except ValueError:
                raise BundleError("path.txt", n, "non-numeric field") from None
            rows.append((t, Configuration(x, y, z, psi), pid, parts[6]))
    if not rows:
        raise BundleError("path.txt", 0, "no waypoints")
    return rows


def read_events(path):
    with open(path) as fh:
        lines = [l.rstrip("\n") for l in fh if l.strip()]
    for n, line in enumerate(lines, 1):
        parts = line.split()
        if len(parts) < 3:
            raise BundleError("events.log", n, "expected 't_sec mode event ...'")
        try:
            float(parts[0])
        except ValueError:
            raise BundleError("events.log", n, "bad timestamp") from None
    if not lines or not (lines[-1].split()[1] == DONE and lines[-1].split()[2] == "enter"):
        raise BundleError("events.log", len(lines), "log truncated before the mission finished")
    return lines


@dataclass
class VerifyReport:
    ok: bool
    lambda_recorded: float
    lambda_replayed: float
    viewpoints_checked: int
    violations: list
    transition_errors: list

    def lines(self):
        out = [f"lambda_C recorded={format_percent(self.lambda_recorded)} replayed={format_percent(self.lambda_replayed)}",
               f"viewpoints checked={self.viewpoints_checked} violations={len(self.violations)}"]
        out += [f"  violation {v}" for v in self.violations]
        out += [f"  transition {t}" for t in self.transition_errors]
        out.append("verification " + ("passed" if self.ok else "FAILED"))
        return out


def replay_and_verify(bundle):
    """Re-fly the logged waypoints in a fresh simulation and check the bundle's claims."""
    for name in BUNDLE_FILES:
        if not os.path.exists(os.path.join(bundle, name)):
            raise BundleError(name, 0, "missing from bundle")
    cfg = cfgmod.load(os.path.join(bundle, "config.json"))
    events = read_events(os.path.join(bundle, "events.log"))
    rows = read_path_file(os.path.join(bundle, "path.txt"))
    with open(os.path.join(bundle, "metrics.json")) as fh:
        metrics = json.load(fh)
    world, spec = build_world(cfg)
    vmap = world.new_map(cfg.planner.resolution, esdf_cap=_esdf_cap(cfg))
    ex = Executor(world, vmap, cfg.planner)
    start = rows[0][1]
    vmap.clear_box(start.position, cfg.planner.robot_box)
    ex.sense(start, SEEN_OTHER)
    groups = {}
    for t, c, pid, kind in rows[1:]:
        groups.setdefault(pid, []).append((c, kind))
    for pid in sorted(groups):
        wps = [c for c, _ in groups[pid]]
        flag = 2 if groups[pid][0][1].startswith(GVI) else SEEN_OTHER
        ex.fly(wps, flag)
    replayed = vmap.coverage_stats().lambda_C
    recorded = metrics.get("lambda_C_percent")
    recorded = None if recorded in (None, "undefined") else float(recorded)
    r = cfg.planner.resolution
    lo, hi = cfg.planner.gvi.delta_min, cfg.planner.gvi.delta_max + r * math.sqrt(3.0)
    violations = []
    checked = 0
    for t, c, pid, kind in rows:
        if not kind.endswith(":viewpoint"):
            continue
        checked += 1
        s = vmap.esdf_query(c.position)
        if not (s.valid and lo <= s.distance <= hi):
            violations.append(f"path {pid} t={t:.3f} ({c.x:.3f}, {c.y:.3f}, {c.z:.3f}) esdf={s.distance:.4f}")
    if recorded is None or replayed is None:
        lam_ok = recorded is None and replayed is None
    else:
        lam_ok = abs(replayed - recorded) <= 1e-3 * max(abs(recorded), 1e-9) + 0.005
    transitions = check_transitions(events)
    ok = lam_ok and not violations and not transitions
    return VerifyReport(ok, recorded, replayed, checked, violations, transitions)


def stats_from_map(path):
    from .voxel_map import read_map
    with open(path) as fh:
        vmap = read_map(fh)
    return vmap.coverage_stats()
