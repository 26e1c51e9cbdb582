"""Generators for the four benchmark worlds: step path, blind corner, slalom, route."""

from __future__ import annotations

import math
from typing import Any, Callable, Sequence

import numpy as np

from pursuit_lab.collision import OccupancyGrid
from pursuit_lab.core_types import ControllerConfig, Pose2D
from pursuit_lab.simulator import Event, Scenario, distance_to_polyline

SCENARIO_KINDS = ("step_path", "blind_corner", "slalom", "waypoint_route")


def densify(waypoints: Sequence[Sequence[float]], spacing: float) -> np.ndarray:
    """Resample a polyline so consecutive points are at most ``spacing`` apart.

    Every waypoint is kept; each segment is split into equal pieces.
    """
    wp = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    out = [wp[0]]
    for a, b in zip(wp[:-1], wp[1:]):
        length = math.hypot(*(b - a))
        if length == 0.0:
            continue
        n = max(1, math.ceil(length / spacing - 1e-9))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return np.array(out)


def _grid_from_free_mask(free_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                         xmin: float, ymin: float, xmax: float, ymax: float,
                         resolution: float) -> OccupancyGrid:
    w = int(round((xmax - xmin) / resolution))
    h = int(round((ymax - ymin) / resolution))
    xs = xmin + (np.arange(w) + 0.5) * resolution
    ys = ymin + (np.arange(h) + 0.5) * resolution
    X, Y = np.meshgrid(xs, ys)
    return OccupancyGrid(~free_fn(X, Y), resolution, xmin, ymin)


def _check_width(width: float, robot_radius: float, what: str) -> None:
    if width < 2.0 * robot_radius:
        raise ValueError(f"{what} of {width} m is narrower than the robot ({2 * robot_radius} m)")


def step_path(amplitude: float = 2.0, step_length: float = 4.0, steps: int = 2,
              resolution: float = 0.05, margin: float = 3.0) -> Scenario:
    """Square-wave reference path with 90 degree corners in an empty world.

    Runs at 1.0 m/s with a 1.5 m minimum regulated radius, the settings of
    the ideal-environment tracking study.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    wps = [(0.0, 0.0)]
    x, level = 0.0, 0.0
    for _ in range(steps):
        x += step_length
        wps.append((x, level))
        level = amplitude if level == 0.0 else 0.0
        wps.append((x, level))
    wps.append((x + step_length, level))
    pts = densify(wps, resolution)
    xmin, xmax = -margin, x + step_length + margin
    ymin, ymax = min(0.0, amplitude) - margin, max(0.0, amplitude) + margin
    grid = _grid_from_free_mask(lambda X, Y: np.ones_like(X, dtype=bool),
                                xmin, ymin, xmax, ymax, resolution)
    return Scenario(
        name="step_path",
        kind="step_path",
        grid=grid,
        path_points=pts,
        start=Pose2D(0.0, 0.0, 0.0),
        controller_overrides={"v_desired": 1.0, "v_max": 1.0, "r_min": 1.5},
        sim_overrides={"a_max": 2.5, "duration_limit": 60.0},
    )


def blind_corner(corridor_width: float = 2.0, approach_length: float = 6.0,
                 exit_length: float = 5.0, obstacle_size: float = 0.5,
                 obstacle_offset: float = 2.5, trigger_offset: float = 1.0,
                 resolution: float = 0.05,
                 robot_radius: float = ControllerConfig.robot_radius) -> Scenario:
    """L-shaped corridor turning left, with an obstacle that appears past the corner.

    The corner apex sits at (approach_length, 0). Crossing the trigger line,
    ``trigger_offset`` meters before the apex, occupies an
    ``obstacle_size`` square whose near face is ``obstacle_offset`` meters
    past the apex on the exit leg. The block sits on the reference path, so
    the only safe outcome is a stop.

    Braking at 0.2 m/s^2 from speed v inside a horizon T leaves a head-on gap
    of about v*T - v^2/(2*a_max), which shrinks as v rises above a_max*T.
    With the 2.5 s horizon used here a robot still at 0.8 m/s out of the
    turn stops closer than one that slowed for it. Nearer placements catch
    robots mid-turn, where a braking slide runs straight into the outer wall.
    """
    _check_width(corridor_width, robot_radius, "corridor width")
    half = corridor_width / 2.0
    ax = approach_length
    # solid border thick enough that the 2 m the collision check reaches at
    # full speed never runs off the map
    wall = 2.5
    tail = 1.5

    def free(X, Y):
        leg1 = (X >= -1.0) & (X <= ax + half) & (np.abs(Y) <= half)
        leg2 = (np.abs(X - ax) <= half) & (Y >= -half) & (Y <= exit_length + tail)
        return leg1 | leg2

    grid = _grid_from_free_mask(free, -1.0 - wall, -half - wall, ax + half + wall,
                                exit_length + tail + wall, resolution)
    pts = densify([(0.0, 0.0), (ax, 0.0), (ax, exit_length)], resolution)
    s = obstacle_size
    rect = ((ax - s / 2.0, obstacle_offset), (ax + s / 2.0, obstacle_offset + s))
    tx = ax - trigger_offset
    trigger = ((tx, -half), (tx, half))
    return Scenario(
        name="blind_corner",
        kind="blind_corner",
        grid=grid,
        path_points=pts,
        start=Pose2D(0.0, 0.0, 0.0),
        events=(Event(trigger, rect),),
        controller_overrides={"collision_horizon": 2.5},
        sim_overrides={"duration_limit": 60.0},
    )


def slalom(corridor_width: float = 1.5, obstacle_size: float = 0.7, obstacles: int = 4,
           spacing: float = 3.0, lead: float = 1.5, resolution: float = 0.05,
           robot_radius: float = ControllerConfig.robot_radius) -> Scenario:
    """Straight corridor with square blocks alternately attached to each wall.

    The reference path runs through the middle of each gap and straight
    between gaps. A 1 s collision horizon keeps the constant-curvature
    projection inside the corridor while the path weaves.
    """
    _check_width(corridor_width, robot_radius, "corridor width")
    gap = corridor_width - obstacle_size
    _check_width(gap, robot_radius, "gap beside an obstacle")
    W, s = corridor_width, obstacle_size
    length = 2 * lead + (obstacles - 1) * spacing + s
    wall = 0.5
    blocks = []
    wps = [(0.0, W / 2.0)]
    for i in range(obstacles):
        x0 = lead + i * spacing
        bottom = i % 2 == 0
        y0, y1 = (0.0, s) if bottom else (W - s, W)
        blocks.append((x0, y0, x0 + s, y1))
        yg = (s + W) / 2.0 if bottom else (W - s) / 2.0
        wps += [(x0, yg), (x0 + s, yg)]
    wps.append((length, W / 2.0))

    def free(X, Y):
        inside = (X >= -1.0) & (X <= length + 1.0) & (Y >= 0.0) & (Y <= W)
        for bx0, by0, bx1, by1 in blocks:
            inside &= ~((X >= bx0) & (X <= bx1) & (Y >= by0) & (Y <= by1))
        return inside

    grid = _grid_from_free_mask(free, -1.0 - wall, -wall, length + 1.0 + wall, W + wall, resolution)
    return Scenario(
        name="slalom",
        kind="slalom",
        grid=grid,
        path_points=densify(wps, resolution),
        start=Pose2D(0.0, W / 2.0, 0.0),
        controller_overrides={"collision_horizon": 1.0},
        sim_overrides={"duration_limit": 60.0},
    )


DEFAULT_ROUTE = ((0.0, 0.0), (8.0, 0.0), (8.0, 6.0), (14.0, 6.0), (14.0, 0.0), (22.0, 0.0))


def waypoint_route(waypoints: Sequence[Sequence[float]] = DEFAULT_ROUTE,
                   corridor_width: float = 2.4, resolution: float = 0.05,
                   robot_radius: float = ControllerConfig.robot_radius) -> Scenario:
    """Hallway network: a free band of ``corridor_width`` around a waypoint polyline."""
    _check_width(corridor_width, robot_radius, "corridor width")
    wps = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if len(wps) < 2:
        raise ValueError("waypoint_route needs at least two waypoints")
    half = corridor_width / 2.0
    pad = half + 1.0
    xmin, ymin = wps.min(axis=0) - pad
    xmax, ymax = wps.max(axis=0) + pad

    def free(X, Y):
        d = distance_to_polyline(np.column_stack((X.ravel(), Y.ravel())), wps)
        return (d <= half).reshape(X.shape)

    grid = _grid_from_free_mask(free, xmin, ymin, xmax, ymax, resolution)
    d0 = wps[1] - wps[0]
    return Scenario(
        name="waypoint_route",
        kind="waypoint_route",
        grid=grid,
        path_points=densify(wps, resolution),
        start=Pose2D(float(wps[0, 0]), float(wps[0, 1]), math.atan2(d0[1], d0[0])),
        controller_overrides={"collision_horizon": 1.0},
        sim_overrides={"duration_limit": 180.0},
    )


_GENERATORS: dict[str, Callable[..., Scenario]] = {
    "step_path": step_path,
    "blind_corner": blind_corner,
    "slalom": slalom,
    "waypoint_route": waypoint_route,
}


def generate_scenario(kind: str, **params: Any) -> Scenario:
    try:
        gen = _GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown scenario kind {kind!r}; expected one of {SCENARIO_KINDS}") from None
    return gen(**params)
