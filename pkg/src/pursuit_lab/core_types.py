"""Geometric primitives, frame transforms and the controller configuration."""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path as FilePath
from typing import Any, Iterable, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class NoValidPath(RuntimeError):
    """Raised when a path has no live points left to track."""


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    wrapped = math.fmod(a, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class PathPoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"path point must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Pose2D:
    """Planar robot pose. ``theta`` is stored normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def point(self) -> PathPoint:
        return PathPoint(self.x, self.y)


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"velocity command must be finite, got ({self.v}, {self.omega})")


ZERO_COMMAND = VelocityCommand(0.0, 0.0)


def to_robot_frame(pose: Pose2D, p: PathPoint) -> PathPoint:
    """Express a world-frame point in the robot's base frame."""
    dx = p.x - pose.x
    dy = p.y - pose.y
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return PathPoint(c * dx + s * dy, -s * dx + c * dy)


def to_world_frame(pose: Pose2D, p: PathPoint) -> PathPoint:
    """Inverse of :func:`to_robot_frame`."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return PathPoint(pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y)


def points_to_robot_frame(pose: Pose2D, pts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`to_robot_frame` for an (N, 2) array."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    dx = pts[:, 0] - pose.x
    dy = pts[:, 1] - pose.y
    return np.column_stack((c * dx + s * dy, -s * dx + c * dy))


def euclidean_distance(a: PathPoint, b: PathPoint) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


class Path:
    """Reference path with a monotone prune cursor.

    The cursor marks the first live point. Points before it have been passed
    and are never considered again for this path's lifetime.
    """

    def __init__(self, points: Iterable[PathPoint] | np.ndarray):
        if isinstance(points, np.ndarray):
            arr = np.asarray(points, dtype=float).reshape(-1, 2)
        else:
            arr = np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)
        if len(arr) == 0:
            raise NoValidPath("path must contain at least one point")
        if not np.all(np.isfinite(arr)):
            raise ValueError("path points must be finite")
        arr.setflags(write=False)
        self.points = arr
        self.prune_cursor = 0
        self.goal_reached = False
        self._cusps: np.ndarray | None = None
        seg = np.hypot(*np.diff(arr, axis=0).T) if len(arr) > 1 else np.zeros(0)
        self._cumulative = np.concatenate(([0.0], np.cumsum(seg)))

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> PathPoint:
        x, y = self.points[i]
        return PathPoint(float(x), float(y))

    @property
    def live_points(self) -> np.ndarray:
        return self.points[self.prune_cursor:]

    @property
    def cusp_indices(self) -> np.ndarray:
        """Indices of interior points where the path reverses direction."""
        if self._cusps is None:
            from pursuit_lab.path_manager import cusp_indices

            self._cusps = cusp_indices(self.points)
        return self._cusps

    def arc_length_between(self, i: int, j: int) -> float:
        """Polyline length from point ``i`` to point ``j``."""
        return float(self._cumulative[j] - self._cumulative[i])

    @property
    def total_length(self) -> float:
        return float(self._cumulative[-1])

    def reset(self) -> None:
        self.prune_cursor = 0
        self.goal_reached = False

    @classmethod
    def from_csv(cls, filename: str | FilePath) -> "Path":
        """Read a path from a CSV file with an ``x,y`` header."""
        with open(filename, encoding="utf-8") as fh:
            header = fh.readline().strip().replace(" ", "")
            if header != "x,y":
                raise ValueError(f"{filename}: expected header 'x,y', got {header!r}")
            arr = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(arr)

    def to_csv(self, filename: str | FilePath) -> None:
        with open(filename, "w", encoding="utf-8") as fh:
            fh.write("x,y\n")
            for x, y in self.points:
                fh.write(f"{float(x)!r},{float(y)!r}\n")


class Variant(str, Enum):
    PP = "pp"
    APP = "app"
    RPP = "rpp"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown variant {value!r}; expected one of pp, app, rpp") from None


@dataclass(frozen=True)
class ControllerConfig:
    """All tunables of the PP / APP / RPP controller.

    Defaults follow the hardware setup used for the corridor and route
    experiments (0.8 m/s top speed, 1 s lookahead time clamped to
    [0.25, 1.2] m, 1.2 m fixed lookahead for plain pure pursuit).
    """

    variant: Variant = Variant.RPP
    v_desired: float = 0.8
    v_max: float = 0.8
    v_min_floor: float = 0.1
    omega_max: float = 3.2
    lookahead_gain: float = 1.0
    lookahead_min: float = 0.25
    lookahead_max: float = 1.2
    fixed_lookahead: float = 1.2
    r_min: float = 0.9
    alpha: float = 1.0
    d_prox: float = 0.6
    use_interpolation: bool = False
    collision_horizon: float = 2.0
    goal_xy_tolerance: float = 0.25
    goal_yaw_tolerance: float = 0.25
    slowdown_radius: float = 0.6
    rotate_to_heading_threshold: float = 0.785
    rotate_gain: float = 2.0
    robot_radius: float = 0.25
    far_prune_factor: float = 2.0
    use_collision_detection: bool = True
    use_rotate_to_heading: bool = True
    use_goal_slowdown: bool = True
    allow_reversing: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite")
        checks = [
            (0 < self.v_min_floor <= self.v_desired <= self.v_max, "0 < v_min_floor <= v_desired <= v_max"),
            (0 < self.lookahead_min <= self.lookahead_max, "0 < lookahead_min <= lookahead_max"),
            (self.fixed_lookahead > 0, "fixed_lookahead > 0"),
            (self.lookahead_gain > 0, "lookahead_gain > 0"),
            (0 < self.alpha <= 1.0, "alpha in (0, 1]"),
            (self.r_min > 0, "r_min > 0"),
            (self.d_prox > 0, "d_prox > 0"),
            (self.collision_horizon > 0, "collision_horizon > 0"),
            (self.far_prune_factor >= 1, "far_prune_factor >= 1"),
            (self.omega_max > 0, "omega_max > 0"),
            (self.robot_radius > 0, "robot_radius > 0"),
            (self.slowdown_radius > 0, "slowdown_radius > 0"),
            (self.goal_xy_tolerance > 0 and self.goal_yaw_tolerance > 0, "goal tolerances > 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(f"invalid ControllerConfig: requires {message}")

    def replace(self, **changes: Any) -> "ControllerConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ControllerConfig":
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise ValueError(f"unknown controller config keys: {sorted(unknown)}")
        return cls(**_coerce_fields(cls, data))

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["variant"] = self.variant.value
        return out


def _coerce_fields(cls: type, data: Mapping[str, Any]) -> dict[str, Any]:
    """Coerce TOML ints to float for float-typed fields."""
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    out = {}
    for key, value in data.items():
        default = defaults.get(key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError(f"{key} must be a boolean")
        elif isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        out[key] = value
    return out


def load_config(filename: str | FilePath, base: ControllerConfig | None = None) -> ControllerConfig:
    """Load a :class:`ControllerConfig` from a TOML file.

    Keys live under a ``[controller]`` table and use the field names verbatim.
    Missing keys keep the values of ``base`` (or the defaults).
    """
    with open(filename, "rb") as fh:
        doc = tomllib.load(fh)
    section = doc.get("controller", {})
    if not isinstance(section, dict):
        raise ValueError(f"{filename}: [controller] must be a table")
    base = base or ControllerConfig()
    merged = {**base.to_dict(), **section}
    return ControllerConfig.from_mapping(merged)


def config_to_toml(cfg: ControllerConfig) -> str:
    lines = ["[controller]"]
    for key, value in cfg.to_dict().items():
        lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)
