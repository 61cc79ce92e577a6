"""Mixture-of-experts traversability fusion with lazy gating and path-cost bounds."""

from .experts import ExpertId, ExpertKind, ExpertSpec, TravCostTable
from .fusion import FusionState, fuse_batch, fuse_step, lower_expectation, upper_expectation
from .gating import GatingConfig, RouterOutput, build_queue, hierarchical_route, lazy_gating
from .grid import ElevationGrid, GridDims, SemanticGrid, TravMap, WeightMap, blend, mse
from .planner import GraphPlanner, PlannerConfig, Pose, PrimitivePlanner, graph_plan, plan
from .world import World, generate_world, load_world, save_world

__version__ = "0.1.0"

__all__ = [
    "ElevationGrid",
    "ExpertId",
    "ExpertKind",
    "ExpertSpec",
    "FusionState",
    "GatingConfig",
    "GraphPlanner",
    "GridDims",
    "PlannerConfig",
    "Pose",
    "PrimitivePlanner",
    "RouterOutput",
    "SemanticGrid",
    "TravCostTable",
    "TravMap",
    "WeightMap",
    "World",
    "blend",
    "build_queue",
    "fuse_batch",
    "fuse_step",
    "generate_world",
    "graph_plan",
    "hierarchical_route",
    "lazy_gating",
    "load_world",
    "lower_expectation",
    "mse",
    "plan",
    "save_world",
    "upper_expectation",
]
