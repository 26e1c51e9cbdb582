"""Occupancy grid world model, distance field and temporal arc collision checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np
from scipy import ndimage

from pursuit_lab.core_types import Pose2D

UNBOUNDED = math.inf


class OutOfBounds(LookupError):
    """A query fell outside the occupancy grid."""


class RollingWindowViolation(UserWarning):
    """A projected motion leaves the bounds of the environment model.

    The message is fixed so the warnings registry reports it once per call
    site; ``reach`` and ``margin`` carry the numbers when known.
    """

    def __init__(self, message: str = "collision check reaches beyond the environment model",
                 reach: float = math.nan, margin: float = math.nan):
        super().__init__(message)
        self.reach = reach
        self.margin = margin


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Axis-aligned occupancy grid.

    ``cells[iy, ix]`` is True for occupied cells; row 0 is the row with the
    smallest y and ``origin`` is the outer corner of cell (0, 0).
    """

    cells: np.ndarray
    resolution: float
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self) -> None:
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")
        cells = np.array(self.cells, dtype=bool, copy=True)
        if cells.ndim != 2 or cells.size == 0:
            raise ValueError("cells must be a non-empty 2-D array")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def empty(cls, width_m: float, height_m: float, resolution: float,
              origin_x: float = 0.0, origin_y: float = 0.0) -> "OccupancyGrid":
        w = int(round(width_m / resolution))
        h = int(round(height_m / resolution))
        return cls(np.zeros((h, w), dtype=bool), resolution, origin_x, origin_y)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def origin(self) -> Pose2D:
        return Pose2D(self.origin_x, self.origin_y, 0.0)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) in meters."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width * self.resolution,
            self.origin_y + self.height * self.resolution,
        )

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(ix, iy) of the cell containing (x, y); may be out of range."""
        return (
            int(math.floor((x - self.origin_x) / self.resolution)),
            int(math.floor((y - self.origin_y) / self.resolution)),
        )

    def in_bounds(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        return 0 <= ix < self.width and 0 <= iy < self.height

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin_x + (ix + 0.5) * self.resolution,
            self.origin_y + (iy + 0.5) * self.resolution,
        )

    def with_rectangle(self, x0: float, y0: float, x1: float, y1: float,
                       occupied: bool = True) -> "OccupancyGrid":
        """Copy of the grid with every cell whose center lies in the rectangle set."""
        xmin, xmax = sorted((x0, x1))
        ymin, ymax = sorted((y0, y1))
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin_y + (np.arange(self.height) + 0.5) * self.resolution
        mx = (xs >= xmin) & (xs <= xmax)
        my = (ys >= ymin) & (ys <= ymax)
        cells = self.cells.copy()
        cells[np.ix_(my, mx)] = occupied
        return OccupancyGrid(cells, self.resolution, self.origin_x, self.origin_y)

    @classmethod
    def from_text(cls, text: str) -> "OccupancyGrid":
        lines = [ln.rstrip("\r") for ln in text.splitlines()]
        lines = [ln for ln in lines if ln.strip()]
        if len(lines) < 3:
            raise ValueError("grid file needs resolution, origin and at least one row")
        key, *vals = lines[0].split()
        if key != "resolution" or len(vals) != 1:
            raise ValueError(f"bad grid header line: {lines[0]!r}")
        resolution = float(vals[0])
        key, *vals = lines[1].split()
        if key != "origin" or len(vals) != 2:
            raise ValueError(f"bad grid origin line: {lines[1]!r}")
        ox, oy = float(vals[0]), float(vals[1])
        rows = [ln.strip() for ln in lines[2:]]
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("grid rows must all have the same width")
        bad = set("".join(rows)) - {"#", "."}
        if bad:
            raise ValueError(f"unexpected grid characters: {sorted(bad)}")
        # file row 0 is the top (max y) row
        cells = np.array([[c == "#" for c in r] for r in reversed(rows)], dtype=bool)
        return cls(cells, resolution, ox, oy)

    @classmethod
    def load(cls, filename: str | FilePath) -> "OccupancyGrid":
        with open(filename, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        out = [f"resolution {float(self.resolution)!r}",
               f"origin {float(self.origin_x)!r} {float(self.origin_y)!r}"]
        for row in self.cells[::-1]:
            out.append("".join("#" if c else "." for c in row))
        return "\n".join(out) + "\n"

    def save(self, filename: str | FilePath) -> None:
        with open(filename, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-cell Euclidean distance (m) to the nearest occupied cell center."""

    grid: OccupancyGrid
    distances: np.ndarray

    def at(self, x: float, y: float) -> float:
        ix, iy = self.grid.cell_of(x, y)
        if not (0 <= ix < self.grid.width and 0 <= iy < self.grid.height):
            raise OutOfBounds(f"({x:.3f}, {y:.3f}) is outside the grid")
        return float(self.distances[iy, ix])

    def sample(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized lookup; out-of-bounds entries are NaN."""
        g = self.grid
        ix = np.floor((np.asarray(xs) - g.origin_x) / g.resolution).astype(int)
        iy = np.floor((np.asarray(ys) - g.origin_y) / g.resolution).astype(int)
        ok = (ix >= 0) & (ix < g.width) & (iy >= 0) & (iy < g.height)
        out = np.full(ix.shape, np.nan)
        out[ok] = self.distances[iy[ok], ix[ok]]
        return out


def compute_distance_field(grid: OccupancyGrid) -> DistanceField:
    if not grid.cells.any():
        dist = np.full(grid.cells.shape, UNBOUNDED)
    else:
        dist = ndimage.distance_transform_edt(~grid.cells, sampling=grid.resolution)
        dist = np.asarray(dist, dtype=float)
    dist.setflags(write=False)
    return DistanceField(grid, dist)


def distance_to_obstacle(df: DistanceField, pose: Pose2D) -> float:
    """Distance of the cell containing the pose; raises :class:`OutOfBounds`."""
    return df.at(pose.x, pose.y)


@dataclass(frozen=True, eq=False)
class ArcProjection:
    xs: np.ndarray
    ys: np.ndarray
    thetas: np.ndarray
    timestamps: np.ndarray
    spacing: float

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def poses(self) -> list[Pose2D]:
        return [Pose2D(float(x), float(y), float(t)) for x, y, t in zip(self.xs, self.ys, self.thetas)]


def unicycle_pose(x: float, y: float, theta: float, v: float, omega: float, t):
    """Closed-form unicycle state after time ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if abs(omega) < 1e-9:
        return x + v * t * math.cos(theta), y + v * t * math.sin(theta), theta + omega * t
    r = v / omega
    th = theta + omega * t
    return (
        x + r * (np.sin(th) - math.sin(theta)),
        y - r * (np.cos(th) - math.cos(theta)),
        th,
    )


def project_arc(pose: Pose2D, v: float, omega: float, horizon: float,
                resolution: float, robot_radius: float = 1.0) -> ArcProjection:
    """Sample the constant-velocity arc the command would trace.

    Samples start one step after ``pose`` and end at ``horizon``. Spacing
    along the arc is at most ``resolution``; pure rotations are sampled every
    ``resolution / robot_radius`` radians.
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    if abs(v) > 0.0:
        n = math.ceil(abs(v) * horizon / resolution)
    elif abs(omega) > 0.0:
        n = math.ceil(abs(omega) * horizon * robot_radius / resolution)
    else:
        n = 1
    n = max(n, 1)
    ts = np.linspace(horizon / n, horizon, n)
    xs, ys, ths = unicycle_pose(pose.x, pose.y, pose.theta, v, omega, ts)
    return ArcProjection(np.asarray(xs, float), np.asarray(ys, float), np.asarray(ths, float),
                         ts, abs(v) * horizon / n)


def check_collision(df: DistanceField, arc: ArcProjection, robot_radius: float) -> float | None:
    """Time of the first arc sample closer than ``robot_radius`` to an obstacle.

    Samples outside the grid count as collisions and raise a
    :class:`RollingWindowViolation` warning.
    """
    if len(arc) == 0:
        raise ValueError("arc projection is empty")
    d = df.sample(arc.xs, arc.ys)
    outside = np.isnan(d)
    hit = outside | (d < robot_radius)
    idx = np.flatnonzero(hit)
    if len(idx) == 0:
        return None
    k = int(idx[0])
    if outside[k]:
        warnings.warn(RollingWindowViolation("projected motion leaves the environment model"),
                      stacklevel=2)
    return float(arc.timestamps[k])


def rolling_window_guard(v: float, horizon: float, pose: Pose2D,
                         grid: OccupancyGrid) -> RollingWindowViolation | None:
    """Warning when the checked distance exceeds the distance to the grid edge."""
    reach = abs(v) * horizon
    if reach == 0.0:
        return None
    xmin, ymin, xmax, ymax = grid.extent
    margin = min(pose.x - xmin, xmax - pose.x, pose.y - ymin, ymax - pose.y)
    if reach > margin:
        return RollingWindowViolation(
            "collision horizon reach exceeds the distance to the edge of the environment "
            "model; lower the speed or horizon, or enlarge the map",
            reach=reach, margin=margin,
        )
    return None
