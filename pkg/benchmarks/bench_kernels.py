"""Time the voxel traversal kernels under each available backend.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

from bwtplan import kernels
from bwtplan.geometry import Configuration
from bwtplan.sensors import camera_sensor, depth_sensor, visual_gain, volume_gain
from bwtplan.sim_world import generate_tank


def workloads():
    world, spec = generate_tank(1, 2, (4.0, 3.5, 3.0), (0.8, 0.6), 0.2, 0, clutter=True)
    pose = Configuration.at(spec.compartments[0].center, 0.4)
    depth, cam = depth_sensor(), camera_sensor()
    mapped = world.new_map()
    world.scan(mapped, pose, depth)

    def scan():
        world.scan(world.new_map(), pose, depth)

    return {
        "depth scan (1.5 deg)": scan,
        "volume gain (3 deg)": lambda: volume_gain(mapped, pose, depth),
        "visual gain": lambda: visual_gain(mapped, pose, cam),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jobs = workloads()
    results = {}
    for backend in kernels.available_backends():
        kernels.use_backend(backend)
        for name, fn in jobs.items():
            fn()  # warm caches
            t0 = time.perf_counter()
            for _ in range(args.repeat):
                fn()
            results[(backend, name)] = (time.perf_counter() - t0) / args.repeat
    backends = kernels.available_backends()
    print(f"{'workload':<24}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name in jobs:
        row = [results[(b, name)] for b in backends]
        line = f"{name:<24}" + "".join(f"{t * 1e3:>10.1f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[-1] / row[0]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
