"""Exploration and distance-constrained visual inspection of multi-compartment tanks."""
from .errors import (ConfigError, InspectionGraphUnreachable, ManholeInfeasible, MapError, NoGlobalRoute,
                     PathCollision, PlannerError, TourInfeasible, UnsafeStart)
from .geometry import Box, Configuration
from .kernels import FREE, OCCUPIED, UNKNOWN, get_backend
from .voxel_map import VoxelMap
from .sensors import SensorModel, camera_sensor, collision_check, depth_sensor, visual_gain, volume_gain
from .plan_graph import Path, PlanGraph, build_local_graph, extract_path, shortest_paths
from .exploration import ExplorationParams, exploration_gain, plan_exploration_step
from .gvi import GviParams, generate_viewpoints, greedy_select, plan_inspection
from .tsp import TourProblem, solve as solve_tour
from .sim_world import generate_tank, ground_truth_stats
from .mission import Mission, MissionParams, traverse_manhole

__version__ = "0.1.0"
