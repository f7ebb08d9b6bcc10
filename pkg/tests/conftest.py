import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bwtplan.kernels import FREE, OCCUPIED
from bwtplan.sim_world import generate_tank, truth_map
from bwtplan.voxel_map import VoxelMap

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


def free_map(shape=(20, 20, 20), r=0.1, origin=(0.0, 0.0, 0.0), esdf_cap=2.0):
    vm = VoxelMap(origin, shape, r, esdf_cap=esdf_cap)
    vm.occupancy[...] = FREE
    return vm


def walled_room(shape=(30, 30, 20), r=0.1):
    """Free box enclosed by a one-voxel occupied shell."""
    vm = free_map(shape, r)
    vm.occupancy[...] = OCCUPIED
    vm.occupancy[1:-1, 1:-1, 1:-1] = FREE
    vm._mark_dirty((0, 0, 0, *(np.array(shape) - 1)))
    return vm


@pytest.fixture
def room_map():
    return walled_room()


@pytest.fixture(scope="session")
def small_tank():
    """Single 2.0 x 1.8 x 1.5 m compartment and its fully mapped voxel grid."""
    world, spec = generate_tank(1, 1, (2.0, 1.8, 1.5), (0.8, 0.6), 0.2, 0)
    return world, spec


@pytest.fixture
def small_truth(small_tank):
    world, _ = small_tank
    return truth_map(world)
