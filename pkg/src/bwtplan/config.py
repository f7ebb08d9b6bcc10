"""Run configuration: JSON in, validated dataclasses out."""
import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .exploration import ExplorationParams
from .gvi import GviParams
from .mission import MissionParams


@dataclass
class ScenarioConfig:
    rows: int = 1
    cols: int = 1
    comp_dims: tuple = (4.0, 3.5, 3.0)
    manhole_dims: tuple = (0.8, 0.6)
    wall_thickness: float = 0.2
    seed: int = 0
    randomize_manholes: bool = False
    clutter: bool = False
    time_budget: float = 5400.0


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    planner: MissionParams = field(default_factory=MissionParams)
    output: str = "run"
    wall_time_cap: float = 3600.0


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(where, "unknown key")
        default = getattr(cls(), key) if _has_defaults(cls) else None
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, where)
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)) or len(value) != len(default):
                raise ConfigError(where, f"expected a list of {len(default)} numbers")
            kwargs[key] = tuple(_number(v, where) for v in value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(where, "expected true or false")
            kwargs[key] = value
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(where, "expected an integer")
            kwargs[key] = value
        elif isinstance(default, float) or default is None:
            kwargs[key] = None if value is None else _number(value, where)
        else:
            if not isinstance(value, str):
                raise ConfigError(where, "expected a string")
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path or "<root>", str(exc)) from None


def _has_defaults(cls):
    try:
        cls()
        return True
    except TypeError:
        return False


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, "expected a number")
    return float(v)


def validate(cfg):
    """Cross-field checks; raises :class:`ConfigError` naming the offending field."""
    s, p = cfg.scenario, cfg.planner
    for name in ("wall_thickness", "time_budget"):
        if getattr(s, name) <= 0:
            raise ConfigError(f"scenario.{name}", "must be positive")
    for name in ("comp_dims", "manhole_dims"):
        if min(getattr(s, name)) <= 0:
            raise ConfigError(f"scenario.{name}", "must be positive")
    if s.rows < 1 or s.cols < 1:
        raise ConfigError("scenario.rows" if s.rows < 1 else "scenario.cols", "must be at least 1")
    for name in ("resolution", "depth_range", "camera_range", "speed", "rate_hz", "gain_ray_resolution",
                 "scan_resolution", "manhole_standoff"):
        if getattr(p, name) <= 0:
            raise ConfigError(f"planner.{name}", "must be positive")
    if min(p.robot_box) <= 0:
        raise ConfigError("planner.robot_box", "must be positive")
    g = p.gvi
    if g.delta_min <= 0:
        raise ConfigError("planner.gvi.delta_min", "must be positive")
    if g.delta_min >= g.delta_max:
        raise ConfigError("planner.gvi.delta_min", "must be smaller than planner.gvi.delta_max")
    if g.delta_max > p.camera_range:
        raise ConfigError("planner.gvi.delta_max", "must not exceed planner.camera_range")
    if g.grid_pitch is not None and g.grid_pitch <= 0:
        raise ConfigError("planner.gvi.grid_pitch", "must be positive")
    e = p.exploration
    if e.zeta <= 0:
        raise ConfigError("planner.exploration.zeta", "must be positive")
    if e.mu <= 0:
        raise ConfigError("planner.exploration.mu", "must be positive")
    if e.edge_radius <= 0:
        raise ConfigError("planner.exploration.edge_radius", "must be positive")
    if cfg.wall_time_cap <= 0:
        raise ConfigError("wall_time_cap", "must be positive")
    return cfg


def _raw_validate(data):
    """Checks that must run before dataclass construction (which would reject them less precisely)."""
    gvi = data.get("planner", {}).get("gvi", {}) if isinstance(data.get("planner"), dict) else {}
    if isinstance(gvi, dict):
        lo = gvi.get("delta_min", GviParams.delta_min)
        hi = gvi.get("delta_max", GviParams.delta_max)
        if isinstance(lo, (int, float)) and isinstance(hi, (int, float)):
            if lo <= 0:
                raise ConfigError("planner.gvi.delta_min", "must be positive")
            if lo >= hi:
                raise ConfigError("planner.gvi.delta_min", "must be smaller than planner.gvi.delta_max")
    exp = data.get("planner", {}).get("exploration", {}) if isinstance(data.get("planner"), dict) else {}
    if isinstance(exp, dict):
        for key in ("zeta", "mu"):
            v = exp.get(key)
            if isinstance(v, (int, float)) and v <= 0:
                raise ConfigError(f"planner.exploration.{key}", "must be positive")


def from_dict(data):
    _raw_validate(data)
    return validate(_build(RunConfig, data, ""))


def load(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return from_dict(data)


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def dumps(cfg):
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"
