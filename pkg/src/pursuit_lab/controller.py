"""Pure Pursuit, Adaptive Pure Pursuit and Regulated Pure Pursuit control law.

All three variants share one pipeline; ``ControllerConfig.variant`` selects
which stages run. Only RPP regulates the linear velocity with the curvature
and proximity heuristics. Every variant goes through the same goal handling,
speed floor, angular clamp and collision gate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from pursuit_lab import path_manager as pm
from pursuit_lab.collision import (
    DistanceField,
    OutOfBounds,
    check_collision,
    project_arc,
    rolling_window_guard,
)
from pursuit_lab.core_types import (
    ZERO_COMMAND,
    ControllerConfig,
    NoValidPath,
    Path,
    PathPoint,
    Pose2D,
    Variant,
    VelocityCommand,
    normalize_angle,
)

LOOKAHEAD_EPS = 1e-6


class DegenerateLookahead(ValueError):
    """The lookahead point coincides with the robot origin."""


class ControllerStatus(str, Enum):
    TRACKING = "Tracking"
    REVERSE_TRACKING = "ReverseTracking"
    ROTATING_TO_HEADING = "RotatingToHeading"
    ROTATING_TO_GOAL = "RotatingToGoal"
    GOAL_REACHED = "GoalReached"
    STOPPED_IMMINENT_COLLISION = "StoppedImminentCollision"
    NO_VALID_PATH = "NoValidPath"


@dataclass(frozen=True)
class RegulationBreakdown:
    """Intermediate linear velocities of one control cycle (all m/s, unsigned)."""

    v_desired: float
    v_curvature: float
    v_proximity: float
    v_combined: float
    v_goal_scaled: float
    v_final: float
    kappa: float
    d_O: float

    @classmethod
    def idle(cls, v_desired: float, d_O: float, kappa: float = 0.0) -> "RegulationBreakdown":
        return cls(v_desired, 0.0, 0.0, 0.0, 0.0, 0.0, kappa, d_O)


class ControlResult(NamedTuple):
    command: VelocityCommand
    status: ControllerStatus
    breakdown: RegulationBreakdown


def compute_curvature(lookahead_local: PathPoint) -> float:
    """Curvature of the arc from the robot origin, tangent to its heading, to the point."""
    l2 = lookahead_local.x ** 2 + lookahead_local.y ** 2
    if math.sqrt(l2) <= LOOKAHEAD_EPS:
        raise DegenerateLookahead("lookahead point is at the robot origin")
    return 2.0 * lookahead_local.y / l2


def curvature_heuristic(v: float, kappa: float, r_min: float) -> float:
    """Scale ``v`` down when the commanded turn radius is below ``r_min``."""
    if abs(kappa) <= 1.0 / r_min:
        return v
    return v / (r_min * abs(kappa))


def proximity_heuristic(v: float, d_O: float, d_prox: float, alpha: float) -> float:
    """Scale ``v`` linearly with obstacle distance inside the ``d_prox`` band."""
    if d_O > d_prox:
        return v
    # the ratio is formed first so every factor is at most one and rounding
    # can never lift the result above v
    return v * (alpha * (d_O / d_prox))


def combine_regulation(v_curvature: float, v_proximity: float) -> float:
    # the stronger slowdown wins
    return min(v_curvature, v_proximity)


def goal_approach_scaling(v: float, dist_to_goal: float, slowdown_radius: float,
                          v_min_floor: float) -> float:
    if dist_to_goal >= slowdown_radius:
        return v
    return max(v * dist_to_goal / slowdown_radius, v_min_floor)


def apply_speed_floor(v: float, v_min_floor: float) -> float:
    return max(v, v_min_floor)


def angular_velocity(v_regulated: float, kappa: float, omega_max: float) -> tuple[float, float]:
    """Angular rate for the regulated speed; saturation rescales ``v`` to keep the curvature."""
    omega = v_regulated * kappa
    if abs(omega) > omega_max:
        omega = math.copysign(omega_max, omega)
        return omega / kappa, omega
    return v_regulated, omega


def rotate_in_place(angle_error: float, omega_max: float, gain: float) -> VelocityCommand:
    omega = min(max(gain * angle_error, -omega_max), omega_max)
    return VelocityCommand(0.0, omega)


def _obstacle_distance(df: DistanceField | None, pose: Pose2D) -> float:
    if df is None:
        return math.inf
    try:
        return df.at(pose.x, pose.y)
    except OutOfBounds:
        return 0.0


def _next_cusp_after(path: Path, index: int) -> int | None:
    cusps = path.cusp_indices
    k = int(np.searchsorted(cusps, index, side="right"))
    return int(cusps[k]) if k < len(cusps) else None


def _leg_direction(path: Path, cursor: int, allow_reversing: bool) -> int:
    """+1 before the first cusp, flipping sign at every cusp already reached."""
    if not allow_reversing:
        return 1
    passed = int(np.searchsorted(path.cusp_indices, cursor, side="right"))
    return -1 if passed % 2 else 1


def _goal_heading(path: Path, theta: float) -> float:
    pts = path.points
    for k in range(len(pts) - 1, 0, -1):
        dx, dy = pts[k] - pts[k - 1]
        if dx or dy:
            heading = math.atan2(dy, dx)
            # a robot that arrived reversing should finish facing backwards
            if abs(normalize_angle(heading - theta)) > math.pi / 2:
                heading += math.pi
            return normalize_angle(heading)
    return theta


def _view_heading(view: pm.LocalPathView, towards: PathPoint) -> float | None:
    """Path direction in the robot frame, from the closest point towards ``towards``."""
    dx = towards.x - view.points[0, 0]
    dy = towards.y - view.points[0, 1]
    if math.hypot(dx, dy) <= LOOKAHEAD_EPS:
        if len(view) < 2:
            return None
        seg = np.diff(view.points, axis=0)
        ok = np.flatnonzero(np.hypot(seg[:, 0], seg[:, 1]) > 0)
        if not len(ok):
            return None
        dx, dy = seg[ok[0]]
    return math.atan2(dy, dx)


def _collision_gate(result: ControlResult, pose: Pose2D, df: DistanceField | None,
                    cfg: ControllerConfig) -> ControlResult:
    if not cfg.use_collision_detection or df is None:
        return result
    cmd = result.command
    if cmd.v == 0.0 and cmd.omega == 0.0:
        return result
    warning = rolling_window_guard(cmd.v, cfg.collision_horizon, pose, df.grid)
    if warning is not None:
        warnings.warn(warning, stacklevel=3)
    arc = project_arc(pose, cmd.v, cmd.omega, cfg.collision_horizon,
                      df.grid.resolution, cfg.robot_radius)
    if check_collision(df, arc, cfg.robot_radius) is None:
        return result
    b = result.breakdown
    stopped = RegulationBreakdown(b.v_desired, b.v_curvature, b.v_proximity, b.v_combined,
                                  b.v_goal_scaled, 0.0, b.kappa, b.d_O)
    return ControlResult(ZERO_COMMAND, ControllerStatus.STOPPED_IMMINENT_COLLISION, stopped)


def compute_command(pose: Pose2D, current_v: float, path: Path, df: DistanceField | None,
                    cfg: ControllerConfig) -> ControlResult:
    """Run one control cycle.

    ``current_v`` is the measured linear speed; it sets the adaptive
    lookahead. ``path`` is advanced in place (prune cursor, goal latch).
    ``df`` may be None for an obstacle-free world without collision gating.
    """
    d_O = _obstacle_distance(df, pose)
    idle = RegulationBreakdown.idle(cfg.v_desired, d_O)
    if path.goal_reached:
        return ControlResult(ZERO_COMMAND, ControllerStatus.GOAL_REACHED, idle)
    if path.prune_cursor >= len(path):
        raise NoValidPath("no live points left on the path")

    goal = path.points[-1]
    next_cusp = _next_cusp_after(path, path.prune_cursor) if cfg.allow_reversing else None
    if next_cusp is None and math.hypot(pose.x - goal[0], pose.y - goal[1]) <= cfg.goal_xy_tolerance:
        err = normalize_angle(_goal_heading(path, pose.theta) - pose.theta)
        if abs(err) <= cfg.goal_yaw_tolerance:
            path.goal_reached = True
            return ControlResult(ZERO_COMMAND, ControllerStatus.GOAL_REACHED, idle)
        cmd = rotate_in_place(err, cfg.omega_max, cfg.rotate_gain)
        return _collision_gate(ControlResult(cmd, ControllerStatus.ROTATING_TO_GOAL, idle),
                               pose, df, cfg)

    closest = pm.find_closest_index(path, pose, end=next_cusp)
    pm.prune_passed(path, closest)
    direction = _leg_direction(path, path.prune_cursor, cfg.allow_reversing)

    lookahead = pm.lookahead_distance(cfg.variant, abs(current_v), cfg)
    view = pm.build_local_view(path, pose, lookahead, cfg.far_prune_factor)
    if cfg.allow_reversing:
        cusp = pm.detect_cusp(view)
        if cusp.present:
            lookahead = min(lookahead, cusp.arc_distance_to_cusp)
            view = view.truncated(cusp.cusp_index)
    carrot = pm.select_lookahead_point(view, lookahead, cfg.use_interpolation)

    heading = _view_heading(view, carrot)
    at_leg_start = path.prune_cursor == 0 or path.prune_cursor in path.cusp_indices
    if cfg.use_rotate_to_heading and at_leg_start and heading is not None:
        err = normalize_angle(heading if direction > 0 else heading - math.pi)
        if abs(err) > cfg.rotate_to_heading_threshold:
            cmd = rotate_in_place(err, cfg.omega_max, cfg.rotate_gain)
            return _collision_gate(
                ControlResult(cmd, ControllerStatus.ROTATING_TO_HEADING, idle), pose, df, cfg)

    try:
        kappa = compute_curvature(carrot)
    except DegenerateLookahead:
        if heading is None:
            return ControlResult(ZERO_COMMAND, ControllerStatus.ROTATING_TO_HEADING, idle)
        err = normalize_angle(heading if direction > 0 else heading - math.pi)
        cmd = rotate_in_place(err, cfg.omega_max, cfg.rotate_gain)
        return _collision_gate(
            ControlResult(cmd, ControllerStatus.ROTATING_TO_HEADING, idle), pose, df, cfg)

    v_des = cfg.v_desired
    if cfg.variant is Variant.RPP:
        v_curv = curvature_heuristic(v_des, kappa, cfg.r_min)
        v_prox = proximity_heuristic(v_des, d_O, cfg.d_prox, cfg.alpha)
        v_comb = combine_regulation(v_curv, v_prox)
    else:
        v_curv = v_prox = v_comb = v_des

    if cfg.use_goal_slowdown:
        end = next_cusp if next_cusp is not None else len(path) - 1
        remaining = path.arc_length_between(path.prune_cursor, end)
        remaining += math.hypot(view.points[0, 0], view.points[0, 1])
        v_goal = goal_approach_scaling(v_comb, remaining, cfg.slowdown_radius, cfg.v_min_floor)
    else:
        v_goal = v_comb
    v_floor = apply_speed_floor(v_goal, cfg.v_min_floor)
    v_cmd, omega = angular_velocity(direction * v_floor, kappa, cfg.omega_max)

    breakdown = RegulationBreakdown(v_des, v_curv, v_prox, v_comb, v_goal, abs(v_cmd), kappa, d_O)
    status = ControllerStatus.TRACKING if direction > 0 else ControllerStatus.REVERSE_TRACKING
    return _collision_gate(ControlResult(VelocityCommand(v_cmd, omega), status, breakdown),
                           pose, df, cfg)


class Controller:
    """Stateful wrapper owning the tracked path and the world model."""

    def __init__(self, cfg: ControllerConfig, distance_field: DistanceField | None = None):
        self.cfg = cfg
        self.distance_field = distance_field
        self.path: Path | None = None
        self.status: ControllerStatus = ControllerStatus.NO_VALID_PATH

    def set_path(self, path: Path) -> None:
        path.reset()
        self.path = path

    def set_world(self, distance_field: DistanceField | None) -> None:
        self.distance_field = distance_field

    def compute(self, pose: Pose2D, current_v: float) -> ControlResult:
        if self.path is None:
            raise NoValidPath("no path has been set")
        result = compute_command(pose, current_v, self.path, self.distance_field, self.cfg)
        self.status = result.status
        return result
