import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bwtplan.geometry import Configuration
from bwtplan.kernels import FREE, OCCUPIED, UNKNOWN
from bwtplan.sensors import (CollisionChecker, SensorModel, camera_sensor, collision_check, depth_sensor,
                             visual_gain, volume_gain)
from bwtplan.voxel_map import VoxelMap

from conftest import free_map
from oracles import visible_voxels

R = 0.1


def test_sensor_validation():
    with pytest.raises(ValueError):
        SensorModel("depth", 0, 90, 10)
    with pytest.raises(ValueError):
        SensorModel("camera", 85, 180, 3)
    with pytest.raises(ValueError):
        SensorModel("camera", 85, 64, 0)
    d, c = depth_sensor(), camera_sensor()
    assert (d.fov_h, d.fov_v, c.fov_h, c.fov_v) == (360.0, 90.0, 85.0, 64.0)


def test_ray_directions_are_unit_and_inside_fov():
    cam = camera_sensor()
    dirs = cam.ray_directions(0.7)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    for d in dirs[::17]:
        assert cam.contains((0, 0, 0), 0.7, d)


def test_volume_gain_zero_when_explored():
    vm = free_map((20, 20, 20))
    assert volume_gain(vm, Configuration(1, 1, 1), depth_sensor()) == 0


def test_volume_gain_in_unknown_void_matches_per_voxel_oracle():
    vm = VoxelMap((0, 0, 0), (16, 16, 16), R)
    o = np.array([0.813, 0.774, 0.791])
    sensor = SensorModel("depth", 360, 90, 0.5, ray_resolution=1.0)
    gain = volume_gain(vm, Configuration.at(o), sensor)
    expected = visible_voxels(vm.occupancy == UNKNOWN, vm.occupancy == OCCUPIED, vm.origin, R, o, 0.0,
                              360, 90, 0.5, to_closest_point=False)
    print("gain", gain, "oracle", len(expected))
    assert gain == len(expected)


def test_volume_gain_occluded_unknown_not_counted():
    vm = free_map((30, 10, 10))
    vm.occupancy[10] = OCCUPIED
    vm.occupancy[11:] = UNKNOWN
    assert volume_gain(vm, Configuration(0.55, 0.55, 0.55), depth_sensor()) == 0
    vm.occupancy[10, 5, 5] = FREE  # a hole lets rays through
    assert volume_gain(vm, Configuration(0.55, 0.55, 0.55), depth_sensor(ray_resolution=1.0)) > 0


def test_visual_gain_examples():
    vm = free_map((20, 20, 20))
    vm.set_occupied([(15, 10, 10)])
    pose = Configuration(0.55, 1.05, 1.05)
    assert visual_gain(vm, pose, camera_sensor()) == 1
    vm.seen[15, 10, 10] = 1
    assert visual_gain(vm, pose, camera_sensor()) == 0


def _random_scene(seed, n=14):
    rng = np.random.default_rng(seed)
    vm = VoxelMap((0, 0, 0), (n, n, n), R)
    vm.occupancy[...] = rng.choice([UNKNOWN, FREE, OCCUPIED], size=vm.shape, p=[0.05, 0.85, 0.10])
    vm.seen[...] = (vm.occupancy == OCCUPIED) & (rng.random(vm.shape) < 0.3)
    while True:
        o = rng.uniform(0.2, n * R - 0.2, 3)
        if vm.occupancy[vm.index_of(o)] == FREE:
            break
    return vm, Configuration.at(o, rng.uniform(-math.pi, math.pi))


@pytest.mark.parametrize("seed", range(8))
def test_visual_gain_matches_per_voxel_oracle(seed):
    vm, pose = _random_scene(seed)
    cam = camera_sensor(max_range=1.0)
    targets = (vm.occupancy == OCCUPIED) & (vm.seen == 0)
    blocking = vm.occupancy != FREE
    expected = visible_voxels(targets, blocking, vm.origin, R, pose.position, pose.psi, 85, 64, 1.0)
    got = visual_gain(vm, pose, cam)
    print(f"seed {seed}: gain {got} oracle {len(expected)}")
    assert got == len(expected)


def _rotate(vm, pose):
    """Rotate the map contents and the pose by +90 degrees about the map's vertical axis."""
    nx, ny, nz = vm.shape
    out = VoxelMap(vm.origin, (ny, nx, nz), vm.resolution)
    # new[i', j'] = old[j', nx - 1 - i'] rotates by +90 degrees
    out.occupancy[...] = np.rot90(vm.occupancy, 1, axes=(0, 1))
    out.seen[...] = np.rot90(vm.seen, 1, axes=(0, 1))
    g = (pose.position - vm.origin) / vm.resolution
    g2 = np.array([ny - g[1], g[0], g[2]])
    return out, Configuration.at(vm.origin + g2 * vm.resolution, pose.psi + math.pi / 2)


@given(st.integers(0, 10_000))
def test_gains_rotation_invariant(seed):
    vm, pose = _random_scene(seed, n=12)
    rot, rpose = _rotate(vm, pose)
    assert rot.occupancy[rot.index_of(rpose.position)] == FREE
    cam = camera_sensor(max_range=1.0)
    assert visual_gain(vm, pose, cam) == visual_gain(rot, rpose, cam)
    # the 360 degree depth fan maps onto itself under a quarter turn
    dep = depth_sensor(max_range=1.0)
    assert volume_gain(vm, pose, dep) == volume_gain(rot, rpose, dep)


@given(st.integers(0, 10_000), st.floats(0.2, 1.0), st.integers(1, 10))
def test_gains_monotone_in_sensor_geometry(seed, shrink, steps):
    vm, pose = _random_scene(seed, n=12)
    cam = camera_sensor(max_range=1.0)
    smaller = SensorModel("camera", 85 * shrink, 64 * shrink, 1.0 * shrink)
    assert visual_gain(vm, pose, smaller) <= visual_gain(vm, pose, cam)
    dep = depth_sensor(max_range=1.0, fov=(360.0, 90.0), ray_resolution=3.0)
    shorter = depth_sensor(max_range=shrink, fov=(360.0, 90.0), ray_resolution=3.0)
    assert volume_gain(vm, pose, shorter) <= volume_gain(vm, pose, dep)
    # narrowing by whole ray steps on each side keeps the remaining rays unchanged
    narrow = depth_sensor(max_range=1.0, fov=(360.0 - 6.0 * steps, 90.0 - 6.0 * min(steps, 7)), ray_resolution=3.0)
    assert volume_gain(vm, pose, narrow) <= volume_gain(vm, pose, dep)


@given(st.integers(0, 10_000))
def test_gain_bounded_by_sphere_candidates(seed):
    vm, pose = _random_scene(seed, n=12)
    dep = depth_sensor(max_range=0.8)
    idx = np.argwhere(vm.occupancy == UNKNOWN)
    centers = vm.origin + (idx + 0.5) * R
    inside = int(np.count_nonzero(np.linalg.norm(centers - pose.position, axis=1) <= 0.8))
    assert volume_gain(vm, pose, dep) <= inside
    occ = np.argwhere((vm.occupancy == OCCUPIED) & (vm.seen == 0))
    c2 = vm.origin + (occ + 0.5) * R
    assert visual_gain(vm, pose, camera_sensor(max_range=0.8)) <= int(
        np.count_nonzero(np.linalg.norm(c2 - pose.position, axis=1) <= 0.8))


def test_collision_check_examples():
    vm = free_map((40, 40, 40))
    assert collision_check(vm, Configuration(2, 2, 2))
    vm.set_occupied([(25, j, k) for j in range(40) for k in range(40)])
    assert not collision_check(vm, Configuration(2.4, 2, 2))
    vm.occupancy[5:10, 5:10, 5:10] = UNKNOWN
    assert not collision_check(vm, Configuration(1.05, 0.7, 0.7))
    # boxes leaving the map are not free
    assert not collision_check(vm, Configuration(0.1, 2, 2))


def test_checker_agrees_with_direct_check():
    rng = np.random.default_rng(5)
    vm = free_map((30, 30, 30))
    vm.occupancy[rng.random(vm.shape) < 0.01] = OCCUPIED
    checker = CollisionChecker(vm)
    pts = rng.uniform(0, 3, (300, 3))
    fast = checker.boxes_free(pts)
    slow = [collision_check(vm, p) for p in pts]
    assert fast.tolist() == slow


def test_segment_sweep_catches_thin_wall():
    vm = free_map((40, 20, 20))
    vm.occupancy[20] = OCCUPIED
    checker = CollisionChecker(vm, (0.2, 0.2, 0.2))
    assert checker.is_free((1.0, 1.0, 1.0)) and checker.is_free((3.0, 1.0, 1.0))
    assert not checker.segment_free((1.0, 1.0, 1.0), (3.0, 1.0, 1.0))
    assert checker.segment_free((1.0, 1.0, 1.0), (1.0, 1.8, 1.0))
