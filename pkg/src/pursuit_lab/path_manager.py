"""Stored-path bookkeeping: closest point, pruning, windowing and lookahead."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pursuit_lab.core_types import (
    ControllerConfig,
    NoValidPath,
    Path,
    PathPoint,
    Pose2D,
    Variant,
    points_to_robot_frame,
)


@dataclass(frozen=True)
class LocalPathView:
    """Windowed slice of the stored path, in the robot frame.

    ``points[0]`` is the closest path point; ``source_indices`` map each row
    back into the stored path.
    """

    points: np.ndarray
    source_indices: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def point(self, i: int) -> PathPoint:
        return PathPoint(float(self.points[i, 0]), float(self.points[i, 1]))

    def truncated(self, last: int) -> "LocalPathView":
        """View restricted to rows ``0..last`` inclusive."""
        return LocalPathView(self.points[: last + 1], self.source_indices[: last + 1])


@dataclass(frozen=True)
class CuspInfo:
    present: bool = False
    arc_distance_to_cusp: float = 0.0
    cusp_index: int = -1


def find_closest_index(path: Path, pose: Pose2D, end: int | None = None) -> int:
    """Index of the live path point nearest to ``pose``.

    The search covers ``prune_cursor..end`` (inclusive, default the last
    point). Ties go to the lowest index.
    """
    start = path.prune_cursor
    stop = len(path) if end is None else min(end + 1, len(path))
    if start >= stop:
        raise NoValidPath("no live points left on the path")
    pts = path.points[start:stop]
    d2 = (pts[:, 0] - pose.x) ** 2 + (pts[:, 1] - pose.y) ** 2
    return start + int(np.argmin(d2))


def prune_passed(path: Path, closest_index: int) -> Path:
    """Advance the prune cursor to ``closest_index`` (never backwards)."""
    if closest_index < path.prune_cursor:
        raise ValueError(
            f"prune cursor cannot move backwards ({path.prune_cursor} -> {closest_index})"
        )
    if closest_index >= len(path):
        raise IndexError(f"closest index {closest_index} out of range for {len(path)} points")
    path.prune_cursor = closest_index
    return path


def build_local_view(
    path: Path, pose: Pose2D, lookahead: float, far_prune_factor: float
) -> LocalPathView:
    """Transform the near part of the live path into the robot frame.

    Keeps the contiguous run of points starting at the prune cursor whose
    distance from the closest point stays within ``far_prune_factor *
    lookahead``. The stored path is not modified.
    """
    start = path.prune_cursor
    live = path.points[start:]
    if len(live) == 0:
        raise NoValidPath("no live points left on the path")
    limit = far_prune_factor * lookahead
    d = np.hypot(live[:, 0] - live[0, 0], live[:, 1] - live[0, 1])
    beyond = np.flatnonzero(d > limit)
    count = int(beyond[0]) if len(beyond) else len(live)
    count = max(count, 1)
    local = points_to_robot_frame(pose, live[:count])
    return LocalPathView(local, np.arange(start, start + count))


def lookahead_distance(variant: Variant | str, v: float, cfg: ControllerConfig) -> float:
    """Fixed lookahead for PP, speed-scaled and clamped for APP / RPP."""
    variant = Variant.parse(variant)
    if variant is Variant.PP:
        return cfg.fixed_lookahead
    return min(max(abs(v) * cfg.lookahead_gain, cfg.lookahead_min), cfg.lookahead_max)


def select_lookahead_point(
    view: LocalPathView, lookahead: float, use_interpolation: bool = False
) -> PathPoint:
    """First point at least ``lookahead`` away from the closest point.

    With interpolation the result is the exact crossing of the path with the
    lookahead circle. Falls back to the last point of the view.
    """
    pts = view.points
    if len(pts) == 0:
        raise NoValidPath("empty local path view")
    origin = pts[0]
    d = np.hypot(pts[:, 0] - origin[0], pts[:, 1] - origin[1])
    hits = np.flatnonzero(d >= lookahead)
    if len(hits) == 0:
        return view.point(len(pts) - 1)
    i = int(hits[0])
    if not use_interpolation or i == 0:
        return view.point(i)
    return _circle_segment_intersection(pts[i - 1], pts[i], origin, lookahead)


def _circle_segment_intersection(
    a: np.ndarray, b: np.ndarray, center: np.ndarray, radius: float
) -> PathPoint:
    # a is inside the circle and b on or outside it, so the larger root lies in (0, 1].
    dx, dy = b[0] - a[0], b[1] - a[1]
    fx, fy = a[0] - center[0], a[1] - center[1]
    qa = dx * dx + dy * dy
    qb = 2.0 * (fx * dx + fy * dy)
    qc = fx * fx + fy * fy - radius * radius
    disc = max(qb * qb - 4.0 * qa * qc, 0.0)
    t = (-qb + math.sqrt(disc)) / (2.0 * qa)
    t = min(max(t, 0.0), 1.0)
    return PathPoint(float(a[0] + t * dx), float(a[1] + t * dy))


CUSP_COS_TOL = 1e-9


def cusp_indices(points: np.ndarray) -> np.ndarray:
    """Interior indices k where consecutive segments point in opposing directions.

    Zero-length segments are skipped so duplicate points do not hide a cusp.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return np.zeros(0, dtype=int)
    seg = np.diff(pts, axis=0)
    nonzero = np.flatnonzero(np.hypot(seg[:, 0], seg[:, 1]) > 0.0)
    if len(nonzero) < 2:
        return np.zeros(0, dtype=int)
    s = seg[nonzero]
    norms = np.hypot(s[:, 0], s[:, 1])
    cos = np.einsum("ij,ij->i", s[:-1], s[1:]) / (norms[:-1] * norms[1:])
    # a right angle rotated into the robot frame picks up rounding noise of
    # either sign; only a clearly obtuse turn counts as a reversal
    reversing = cos < -CUSP_COS_TOL
    # segment j runs from point j to j+1, so the shared vertex is nonzero[k+1]
    return nonzero[1:][reversing].astype(int)


def detect_cusp(view: LocalPathView) -> CuspInfo:
    """First direction reversal in the view, with arc length from its first point."""
    cusps = cusp_indices(view.points)
    if len(cusps) == 0:
        return CuspInfo()
    k = int(cusps[0])
    seg = np.diff(view.points[: k + 1], axis=0)
    arc = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
    return CuspInfo(True, arc, k)


def arc_length(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    seg = np.diff(points, axis=0)
    return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
