"""Comparison tables and SVG trajectory plots."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from pursuit_lab.collision import OccupancyGrid
from pursuit_lab.simulator import MetricsReport, TrajectoryLog

# Five-stop speed ramp from standstill (dark purple) to v_max (yellow).
SPEED_RAMP = ("#440154", "#3b528b", "#21918c", "#5ec962", "#fde725")
PATH_COLOR = "#9e9e9e"
OBSTACLE_COLOR = "#202020"
PX_PER_M = 60.0

# (label, metric attribute, format)
_TIME = ("Time (s)", "time", "{:.2f}")
_DIST = ("Distance (m)", "distance_traveled", "{:.3f}")
_COLL = ("Collisions", "collisions", "{:d}")
_SPEED = ("Average Speed (m/s)", "average_speed", "{:.3f}")
_AVG_OBS = ("Average Distance Obstacle (m)", "average_distance_to_obstacle", "{:.3f}")
_MIN_OBS = ("Min Distance to Obstacle (m)", "min_distance_to_obstacle", "{:.3f}")
_TO_PATH = ("Average Distance to Path (m)", "average_distance_to_path", "{:.4f}")
_STOPPED = ("Avg Stopped Distance (m)", "stopped_distance_to_obstacle", "{:.3f}")

CORRIDOR_ROWS = (_TIME, _DIST, _COLL, _SPEED, _AVG_OBS, _TO_PATH)
ROUTE_ROWS = (_TIME, _DIST, _COLL, _SPEED, _MIN_OBS, _TO_PATH)


def metric_rows(kind: str) -> tuple[tuple[str, str, str], ...]:
    """Row set of the comparison table for a scenario kind."""
    if kind == "waypoint_route":
        return ROUTE_ROWS
    if kind == "blind_corner":
        return CORRIDOR_ROWS + (_STOPPED,)
    return CORRIDOR_ROWS


def _cell(metrics: MetricsReport | None, attr: str, fmt: str) -> str:
    if metrics is None:
        return "failed"
    value = getattr(metrics, attr)
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return fmt.format(value)


def comparison_table(results: Mapping[str, MetricsReport | None], kind: str) -> str:
    """Plain-text table: one row per metric, one column per variant.

    A column whose run did not succeed gets a ``*`` and a footnote with the
    outcome; a ``None`` entry means the run raised before producing metrics.
    """
    names = list(results)
    header = []
    notes = []
    for name in names:
        m = results[name]
        if m is None or not m.success:
            header.append(name.upper() + "*")
            notes.append(f"* {name.upper()} failed: {m.outcome if m is not None else 'error'}")
        else:
            header.append(name.upper())
    rows = [[label] + [_cell(results[n], attr, fmt) for n in names]
            for label, attr, fmt in metric_rows(kind)]
    widths = [max(len(r[0]) for r in rows)]
    widths += [max(len(header[i]), *(len(r[i + 1]) for r in rows)) for i in range(len(names))]
    lines = ["  ".join([" " * widths[0]] + [h.rjust(w) for h, w in zip(header, widths[1:])])]
    for r in rows:
        lines.append("  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]))
    return "\n".join(lines + notes) + "\n"


def speed_color(v: float, v_max: float) -> str:
    """Linear interpolation along :data:`SPEED_RAMP` for |v| in [0, v_max]."""
    f = min(max(abs(v) / v_max, 0.0), 1.0) if v_max > 0 else 0.0
    pos = f * (len(SPEED_RAMP) - 1)
    i = min(int(pos), len(SPEED_RAMP) - 2)
    t = pos - i
    a = [int(SPEED_RAMP[i][k:k + 2], 16) for k in (1, 3, 5)]
    b = [int(SPEED_RAMP[i + 1][k:k + 2], 16) for k in (1, 3, 5)]
    return "#" + "".join(f"{round(x + (y - x) * t):02x}" for x, y in zip(a, b))


def _obstacle_rects(grid: OccupancyGrid) -> list[tuple[int, int, int]]:
    """Horizontal runs of occupied cells as (row, first column, length)."""
    runs = []
    for iy, row in enumerate(grid.cells):
        padded = np.concatenate(([False], row, [False])).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        for start, stop in zip(edges[::2], edges[1::2]):
            runs.append((iy, int(start), int(stop - start)))
    return runs


def render_svg(grid: OccupancyGrid, path_points: np.ndarray,
               trajectories: Sequence[TrajectoryLog], v_max: float,
               title: str | None = None) -> str:
    """SVG of the world with the reference path and speed-colored trajectories."""
    xmin, ymin, xmax, ymax = grid.extent
    s = PX_PER_M
    width = (xmax - xmin) * s
    height = (ymax - ymin) * s
    legend_h = 28.0
    title_h = 22.0 if title else 0.0

    def px(x: float, y: float) -> str:
        return f"{(x - xmin) * s:.2f},{title_h + (ymax - y) * s:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height + legend_h + title_h:.0f}" '
        f'viewBox="0 0 {width:.2f} {height + legend_h + title_h:.2f}">',
        f'<rect x="0" y="{title_h:.2f}" width="{width:.2f}" height="{height:.2f}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="4" y="16" font-family="sans-serif" font-size="14">{escape(title)}</text>')

    res = grid.resolution * s
    out.append(f'<g fill="{OBSTACLE_COLOR}">')
    for iy, ix, n in _obstacle_rects(grid):
        x = ix * res
        y = title_h + (grid.height - iy - 1) * res
        out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{n * res:.2f}" height="{res:.2f}"/>')
    out.append("</g>")

    pts = " ".join(px(x, y) for x, y in np.asarray(path_points, dtype=float))
    out.append(f'<polyline points="{pts}" fill="none" stroke="{PATH_COLOR}" stroke-width="3"/>')

    for log in trajectories:
        pos = log.positions(include_start=True)
        colors = [speed_color(v, v_max) for v in log.speeds()]
        k = 0
        while k < len(colors):
            j = k
            while j + 1 < len(colors) and colors[j + 1] == colors[k]:
                j += 1
            seg = " ".join(px(x, y) for x, y in pos[k:j + 2])
            out.append(f'<polyline points="{seg}" fill="none" stroke="{colors[k]}" '
                       'stroke-width="2" stroke-linecap="round"/>')
            k = j + 1

    y0 = title_h + height + 6.0
    for i, color in enumerate(SPEED_RAMP):
        v = v_max * i / (len(SPEED_RAMP) - 1)
        x = 4.0 + i * 70.0
        out.append(f'<rect x="{x:.2f}" y="{y0:.2f}" width="14" height="14" fill="{color}"/>')
        out.append(f'<text x="{x + 18:.2f}" y="{y0 + 12:.2f}" font-family="sans-serif" '
                   f'font-size="11">{v:.2f} m/s</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
