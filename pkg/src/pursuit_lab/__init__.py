"""Pure Pursuit, Adaptive Pure Pursuit and Regulated Pure Pursuit path tracking."""

from pursuit_lab.collision import (
    DistanceField,
    OccupancyGrid,
    OutOfBounds,
    RollingWindowViolation,
    check_collision,
    compute_distance_field,
    distance_to_obstacle,
    project_arc,
    rolling_window_guard,
)
from pursuit_lab.controller import (
    Controller,
    ControllerStatus,
    RegulationBreakdown,
    compute_command,
)
from pursuit_lab.core_types import (
    ControllerConfig,
    NoValidPath,
    Path,
    PathPoint,
    Pose2D,
    Variant,
    VelocityCommand,
    load_config,
)
from pursuit_lab.scenarios import generate_scenario
from pursuit_lab.simulator import (
    MetricsReport,
    Scenario,
    SimConfig,
    TrajectoryLog,
    load_scenario,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Controller", "ControllerConfig", "ControllerStatus", "DistanceField", "MetricsReport",
    "NoValidPath", "OccupancyGrid", "OutOfBounds", "Path", "PathPoint", "Pose2D",
    "RegulationBreakdown", "RollingWindowViolation", "Scenario", "SimConfig", "TrajectoryLog",
    "Variant", "VelocityCommand", "check_collision", "compute_command", "compute_distance_field",
    "distance_to_obstacle", "generate_scenario", "load_config", "load_scenario", "project_arc",
    "rolling_window_guard", "run_scenario",
]
