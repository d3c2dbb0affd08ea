"""Alternating-minimization trajectory optimization for fixed-wing aerial vehicles."""

from .basis import BasisSet, DimensionError, build_basis, eval_curve
from .model import (
    BoundaryState,
    Ellipsoid,
    Horizon,
    Limits,
    ProblemSpec,
    ValidationError,
    Weights,
    check_avoidance,
    eval_collision_residual,
    eval_kinematic_residual,
    inflate_obstacles,
)
from .solver import (
    HeadingVariant,
    ResidualReport,
    SolverConfig,
    SolverState,
    Status,
    TrajectorySolution,
    estimate_traversal_time,
    solve,
)
from .postprocess import ControlProfile, SolutionMetrics, compute_metrics, recover_controls, summarize
from .scenario import Scenario, ScenarioError, load_scenario, load_scenario_file, save_scenario

__version__ = "0.1.0"
