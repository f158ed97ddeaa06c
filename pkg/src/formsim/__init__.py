"""Distance-based multi-robot formation control simulator."""

from .control import (
    BiasedPairReport,
    EstimatorAssignment,
    EstimatorState,
    LocalMeasurement,
    biased_pair_dynamics,
    compose_sigma,
    estimator_step,
    gradient_control,
    motion_control,
    validate_estimation_assignment,
)
from .core import (
    FormationGraph,
    MotionCommand,
    MotionParameters,
    MotionSolution,
    RigidityReport,
    ShapeSpec,
    build_incidence,
    check_infinitesimal_rigidity,
    distance_errors,
    potential,
    relative_positions,
    rigidity_matrix,
    solve_motion_parameters,
)
from .engine import RunMetrics, SimConfig, Simulator, TickRecord, WorldState, metrics, run
from .scenario import Scenario, load_scenario, load_bundled_scenario, read_log, write_log
from .sensors import ActuatorSpec, BiasTable, LidarSpec, apply_actuation, measure_edge

__version__ = "0.1.0"

__all__ = [
    "ActuatorSpec",
    "BiasTable",
    "BiasedPairReport",
    "EstimatorAssignment",
    "EstimatorState",
    "FormationGraph",
    "LidarSpec",
    "LocalMeasurement",
    "MotionCommand",
    "MotionParameters",
    "MotionSolution",
    "RigidityReport",
    "RunMetrics",
    "Scenario",
    "ShapeSpec",
    "SimConfig",
    "Simulator",
    "TickRecord",
    "WorldState",
    "apply_actuation",
    "biased_pair_dynamics",
    "build_incidence",
    "check_infinitesimal_rigidity",
    "compose_sigma",
    "distance_errors",
    "estimator_step",
    "gradient_control",
    "load_bundled_scenario",
    "load_scenario",
    "measure_edge",
    "metrics",
    "motion_control",
    "potential",
    "read_log",
    "relative_positions",
    "rigidity_matrix",
    "run",
    "solve_motion_parameters",
    "validate_estimation_assignment",
    "write_log",
]
