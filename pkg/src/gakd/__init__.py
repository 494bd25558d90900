"""Genetic-algorithm kinodynamic planning over triangle-mesh terrain."""
from .baselines import MPPIConfig, log_mppi_optimize, mppi_optimize, plan_with
from .bench import (BenchmarkReport, PlannerSettings, Scenario, delta_metric, horizon_sweep,
                    pi_metric, psi_metric, run_scenarios)
from .cost import CostWeights, rollout_cost, transition_cost
from .dynamics import ControlInput, VehicleParams, VehicleState, initial_state, step
from .ga_planner import GAConfig, Trajectory, optimize, plan
from .mesh import TriangleMesh, generate_terrain, load_ply, save_ply
from .spatial_index import VoxelGrid, build_index, nearest_face
from .world import World

__all__ = [
    "BenchmarkReport", "ControlInput", "CostWeights", "GAConfig", "MPPIConfig", "PlannerSettings",
    "Scenario", "Trajectory", "TriangleMesh", "VehicleParams", "VehicleState", "VoxelGrid", "World",
    "build_index", "delta_metric", "generate_terrain", "horizon_sweep", "initial_state", "load_ply",
    "log_mppi_optimize", "mppi_optimize", "nearest_face", "optimize", "pi_metric", "plan", "plan_with",
    "psi_metric", "rollout_cost", "run_scenarios", "save_ply", "step", "transition_cost",
]
