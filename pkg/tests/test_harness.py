import json
import os
import shutil

import pytest

from bwtplan import config as cfgmod
from bwtplan.cli import main
from bwtplan.errors import ConfigError
from bwtplan.harness import BUNDLE_FILES, BundleError, read_events, replay_and_verify, run_mission, stats_from_map

FAST = {
    "scenario": {"rows": 1, "cols": 1, "comp_dims": [3.0, 2.5, 2.0], "seed": 0},
    "planner": {
        "depth_range": 5.0, "gain_ray_resolution": 6.0, "scan_resolution": 3.0, "camera_range": 2.0,
        "exploration": {"vertex_count": 60, "max_iterations": 8},
        "gvi": {"delta_min": 0.6, "delta_max": 0.9, "tsp_restarts": 2},
    },
}


def fast_config(**scenario):
    data = json.loads(json.dumps(FAST))
    data["scenario"].update(scenario)
    return cfgmod.from_dict(data)


def field_of(data):
    with pytest.raises(ConfigError) as info:
        cfgmod.from_dict(data)
    return info.value.field


def test_config_errors_name_the_field():
    assert field_of({"planner": {"gvi": {"delta_min": 1.5, "delta_max": 1.0}}}) == "planner.gvi.delta_min"
    assert field_of({"planner": {"gvi": {"delta_min": 0.0}}}) == "planner.gvi.delta_min"
    assert field_of({"planner": {"exploration": {"zeta": -1}}}) == "planner.exploration.zeta"
    assert field_of({"scenario": {"rows": 0}}) == "scenario.rows"
    assert field_of({"scenario": {"colour": 1}}) == "scenario.colour"
    assert field_of({"scenario": {"comp_dims": [1, 2]}}) == "scenario.comp_dims"
    assert field_of({"scenario": {"clutter": 1}}) == "scenario.clutter"
    assert field_of({"planner": {"speed": "fast"}}) == "planner.speed"
    assert field_of({"planner": {"camera_range": 1.0}}) == "planner.gvi.delta_max"


def test_config_round_trip():
    cfg = fast_config(rows=2, randomize_manholes=True)
    again = cfgmod.from_dict(json.loads(cfgmod.dumps(cfg)))
    assert again == cfg
    assert again.planner.gvi.delta_max == 0.9 and again.scenario.comp_dims == (3.0, 2.5, 2.0)


def test_load_rejects_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        cfgmod.load(p)


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("bundle"))
    res = run_mission(fast_config(), out)
    return out, res


def test_bundle_contents(bundle):
    out, res = bundle
    print(res.metrics)
    assert res.exit_code == 0 and res.metrics["status"] == "done"
    assert all(os.path.exists(os.path.join(out, f)) for f in BUNDLE_FILES)
    assert read_events(os.path.join(out, "events.log"))[-1].split()[1:3] == ["Done", "enter"]
    assert res.metrics["compartments_visited"] == 1


def test_fresh_bundle_verifies(bundle):
    out, res = bundle
    rep = replay_and_verify(out)
    print("\n".join(rep.lines()))
    assert rep.ok and rep.viewpoints_checked > 0 and not rep.violations
    assert abs(rep.lambda_replayed - float(res.metrics["lambda_C_percent"])) <= 0.005


def _copy(bundle, tmp_path):
    dst = tmp_path / "copy"
    shutil.copytree(bundle[0], dst)
    return dst


def test_moved_viewpoint_is_flagged(bundle, tmp_path):
    dst = _copy(bundle, tmp_path)
    lines = (dst / "path.txt").read_text().splitlines()
    k = next(i for i, line in enumerate(lines) if line.endswith(":viewpoint"))
    parts = lines[k].split()
    # 0.3 m from the x = 0.2 wall, well inside the minimum viewing distance
    parts[1] = "0.5"
    lines[k] = " ".join(parts)
    (dst / "path.txt").write_text("\n".join(lines) + "\n")
    rep = replay_and_verify(str(dst))
    print("\n".join(rep.lines()))
    assert not rep.ok and len(rep.violations) == 1


def test_truncated_log_is_rejected(bundle, tmp_path, capsys):
    dst = _copy(bundle, tmp_path)
    lines = (dst / "events.log").read_text().splitlines()
    (dst / "events.log").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(BundleError) as info:
        replay_and_verify(str(dst))
    assert info.value.file == "events.log"
    assert main(["verify", str(dst)]) == 2
    assert "events.log" in capsys.readouterr().err


def test_missing_file_and_bad_path_rows(bundle, tmp_path):
    dst = _copy(bundle, tmp_path)
    (dst / "path.txt").write_text("# header\n0.0 1.0 2.0\n")
    with pytest.raises(BundleError) as info:
        replay_and_verify(str(dst))
    assert (info.value.file, info.value.line) == ("path.txt", 2)
    os.remove(dst / "map.txt")
    with pytest.raises(BundleError):
        replay_and_verify(str(dst))


def test_runs_are_byte_identical(bundle, tmp_path):
    out, _ = bundle
    run_mission(fast_config(), str(tmp_path))
    for name in ("metrics.json", "events.log", "path.txt"):
        with open(os.path.join(out, name), "rb") as a, open(tmp_path / name, "rb") as b:
            assert a.read() == b.read(), name


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(FAST))
    scen = tmp_path / "scen.json"
    tri = tmp_path / "tank.tri"
    assert main(["generate", "--config", str(cfg), "--rows", "2", "-o", str(scen), "--triangles", str(tri)]) == 0
    assert json.loads(scen.read_text())["rows"] == 2
    assert tri.stat().st_size > 0
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--scenario", str(scen), "--rows", "1", "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "status=done" in text
    assert main(["verify", str(out)]) == 0
    assert "verification passed" in capsys.readouterr().out
    assert main(["stats", str(out / "map.txt")]) == 0
    line = capsys.readouterr().out
    lam = json.loads((out / "metrics.json").read_text())["lambda_C_percent"]
    print(line)
    assert f"lambda_C={lam}%" in line
    st = stats_from_map(str(out / "map.txt"))
    assert st.surface_voxels > 0


def test_cli_config_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", "--config", str(bad), "-o", str(tmp_path / "x")]) == 2
    assert main(["run", "--delta-min", "1.5", "--delta-max", "1.0", "-o", str(tmp_path / "y")]) == 2
    err = capsys.readouterr().err
    assert "planner.gvi.delta_min" in err
    assert not (tmp_path / "y").exists()
