"""Command line: ``generate``, ``run``, ``verify`` and ``stats``."""
import argparse
import json
import sys

from . import config as cfgmod
from .errors import ConfigError
from .harness import BundleError, build_world, replay_and_verify, run_mission, stats_from_map
from .voxel_map import format_percent


def _load_config(args):
    data = {}
    if args.config:
        data = _read_json(args.config, "<config>")
    if getattr(args, "scenario", None):
        data["scenario"] = _read_json(args.scenario, "scenario")
    scen = data.setdefault("scenario", {})
    plan = data.setdefault("planner", {})
    for key in ("rows", "cols", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            scen[key] = v
    if getattr(args, "manhole", None):
        scen["manhole_dims"] = args.manhole
    if getattr(args, "delta_max", None) is not None:
        plan.setdefault("gvi", {})["delta_max"] = args.delta_max
    if getattr(args, "delta_min", None) is not None:
        plan.setdefault("gvi", {})["delta_min"] = args.delta_min
    if getattr(args, "speed", None) is not None:
        plan["speed"] = args.speed
    if getattr(args, "planner_seed", None) is not None:
        plan["seed"] = args.planner_seed
    if getattr(args, "out", None):
        data["output"] = args.out
    return cfgmod.from_dict(data)


def _read_json(path, field):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(field, f"cannot read {path}: {exc}") from None


def _scenario_args(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--scenario", help="JSON scenario (generation parameters)")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--seed", type=int, help="scenario seed")
    p.add_argument("--manhole", type=float, nargs=2, metavar=("HEIGHT", "WIDTH"))


def main(argv=None):
    ap = argparse.ArgumentParser(prog="bwtplan", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write a scenario file")
    _scenario_args(g)
    g.add_argument("-o", "--out", required=True, help="scenario JSON to write")
    g.add_argument("--triangles", help="also export the world as an ASCII triangle list")

    r = sub.add_parser("run", help="run a mission and write an artifact bundle")
    _scenario_args(r)
    r.add_argument("--delta-min", type=float)
    r.add_argument("--delta-max", type=float)
    r.add_argument("--speed", type=float)
    r.add_argument("--planner-seed", type=int)
    r.add_argument("-o", "--out", help="bundle directory")

    v = sub.add_parser("verify", help="replay a bundle and check its claims")
    v.add_argument("bundle")

    s = sub.add_parser("stats", help="coverage statistics of a map export")
    s.add_argument("map")

    args = ap.parse_args(argv)
    try:
        if args.verb == "generate":
            cfg = _load_config(args)
            with open(args.out, "w") as fh:
                json.dump(cfgmod.to_dict(cfg)["scenario"], fh, indent=2, sort_keys=True)
                fh.write("\n")
            world, spec = build_world(cfg)
            if args.triangles:
                with open(args.triangles, "w") as fh:
                    world.export_triangles(fh)
            print(f"{len(spec.compartments)} compartments, {len(spec.manholes)} manholes -> {args.out}")
            return 0
        if args.verb == "run":
            cfg = _load_config(args)
            res = run_mission(cfg)
            m = res.metrics
            print(f"status={m['status']} compartments={m['compartments_visited']}/{m['compartments_total']} "
                  f"duration={m['duration_s']}s lambda_C={m['lambda_C_percent']}% bundle={res.bundle}")
            return res.exit_code
        if args.verb == "verify":
            rep = replay_and_verify(args.bundle)
            print("\n".join(rep.lines()))
            return 0 if rep.ok else 1
        if args.verb == "stats":
            st = stats_from_map(args.map)
            print(f"V_E_tot={st.V_tot:.3f} m3 S_C_tot={st.S_tot:.2f} m2 lambda_C={format_percent(st.lambda_C)}%")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BundleError as exc:
        print(f"bundle error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
