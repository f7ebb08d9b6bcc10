"""Backend selection for the voxel traversal kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module is used. Set ``BWTPLAN_BACKEND=python`` to force the fallback (both
backends produce identical results, the variable only trades speed).
"""
import importlib
import os

import numpy as np

from ._pykernels import FREE, OCCUPIED, UNKNOWN

__all__ = ["BACKEND", "FREE", "OCCUPIED", "UNKNOWN", "available_backends", "get_backend", "use_backend"]


def _load(name):
    if name == "compiled":
        return importlib.import_module("bwtplan._kernels")
    if name == "python":
        return importlib.import_module("bwtplan._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        _load("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


_requested = os.environ.get("BWTPLAN_BACKEND", "").strip().lower()
if _requested == "python":
    _impl = _load("python")
    BACKEND = "python"
else:
    try:
        _impl = _load("compiled")
        BACKEND = "compiled"
    except ImportError:
        _impl = _load("python")
        BACKEND = "python"


def get_backend():
    return BACKEND


def use_backend(name):
    """Switch the active backend at runtime (tests and benchmarks)."""
    global _impl, BACKEND
    _impl = _load(name)
    BACKEND = name


def _vec(p):
    return np.ascontiguousarray(p, dtype=np.float64).reshape(3)


def _dirs(d):
    return np.ascontiguousarray(d, dtype=np.float64).reshape(-1, 3)


def trace_solid(solid, origin, r, o, dirs, max_range):
    return _impl.trace_solid(solid, _vec(origin), float(r), _vec(o), _dirs(dirs), float(max_range))


def integrate_rays(occ, origin, r, o, dirs, dists, max_range, nudge):
    dists = np.ascontiguousarray(dists, dtype=np.float64).reshape(-1)
    return _impl.integrate_rays(occ, _vec(origin), float(r), _vec(o), _dirs(dirs), dists,
                                float(max_range), float(nudge))


def gain_rays(occ, origin, r, o, dirs, max_range, yaw, half_h, half_v, full_h, clip, visited, count_state):
    clip = [int(c) for c in clip]
    return int(_impl.gain_rays(occ, _vec(origin), float(r), _vec(o), _dirs(dirs), float(max_range),
                               float(yaw), float(half_h), float(half_v), bool(full_h), clip, visited,
                               int(count_state)))


def visible_targets(occ, seen, origin, r, o, yaw, half_h, half_v, full_h, max_range, clip,
                    unseen_only, block_unknown):
    clip = [int(c) for c in clip]
    return _impl.visible_targets(occ, seen, _vec(origin), float(r), _vec(o), float(yaw), float(half_h),
                                 float(half_v), bool(full_h), float(max_range), clip, bool(unseen_only),
                                 bool(block_unknown))
