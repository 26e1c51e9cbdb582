"""Deterministic differential-drive simulation of a tracking controller."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Any, Mapping, Sequence

import numpy as np

from pursuit_lab.collision import (
    DistanceField,
    OccupancyGrid,
    OutOfBounds,
    compute_distance_field,
    unicycle_pose,
)
from pursuit_lab.controller import (
    ControllerStatus,
    RegulationBreakdown,
    compute_command,
)
from pursuit_lab.core_types import (
    ControllerConfig,
    NoValidPath,
    Path,
    Pose2D,
    Variant,
    VelocityCommand,
    _coerce_fields,
    _toml_value,
    tomllib,
)

STOP_PERSISTENCE = 2.0  # seconds of continuous imminent-collision stop that end a run
# a held stop in front of an obstacle is the safe result, not a failure
SAFE_OUTCOMES = ("goal_reached", "stopped")


@dataclass(frozen=True)
class SimConfig:
    """Plant and run settings.

    ``phase`` in [0, 1) shifts the start pose forward by that fraction of one
    control period travelled at the desired speed; it is how repeated runs
    sample different alignments between the control clock and the world.
    """

    dt: float = 0.05
    a_max: float = 0.2
    duration_limit: float = 120.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.a_max > 0:
            raise ValueError("a_max must be > 0")
        if not self.duration_limit > 0:
            raise ValueError("duration_limit must be > 0")
        if not 0.0 <= self.phase < 1.0:
            raise ValueError("phase must be in [0, 1)")

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RobotState:
    pose: Pose2D
    v: float = 0.0
    omega: float = 0.0


def step_kinematics(state: RobotState, cmd: VelocityCommand, dt: float, a_max: float,
                    omega_max: float) -> RobotState:
    """Advance the plant one period.

    Linear speed slews toward the command by at most ``a_max * dt``; the
    angular rate is clamped and applied directly.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    dv = cmd.v - state.v
    max_dv = a_max * dt
    if abs(dv) <= max_dv * (1.0 + 1e-9):
        v = cmd.v
    else:
        v = state.v + math.copysign(max_dv, dv)
    omega = min(max(cmd.omega, -omega_max), omega_max)
    p = state.pose
    x, y, th = unicycle_pose(p.x, p.y, p.theta, v, omega, dt)
    return RobotState(Pose2D(float(x), float(y), float(th)), v, omega)


@dataclass(frozen=True)
class Event:
    """Occupy ``rect`` once the robot crosses the ``trigger`` segment."""

    trigger: tuple[tuple[float, float], tuple[float, float]]
    rect: tuple[tuple[float, float], tuple[float, float]]


@dataclass
class Scenario:
    name: str
    grid: OccupancyGrid
    path_points: np.ndarray
    start: Pose2D
    events: tuple[Event, ...] = ()
    kind: str = "custom"
    goal_xy_tolerance: float | None = None
    goal_yaw_tolerance: float | None = None
    controller_overrides: dict[str, Any] = field(default_factory=dict)
    sim_overrides: dict[str, Any] = field(default_factory=dict)
    source_files: tuple[str, ...] = ()

    def controller_config(self, variant: Variant | str | None = None,
                          base: ControllerConfig | None = None, **extra: Any) -> ControllerConfig:
        """``base`` with this scenario's overrides applied, then ``extra``."""
        base = base or ControllerConfig()
        changes: dict[str, Any] = dict(self.controller_overrides)
        if self.goal_xy_tolerance is not None:
            changes["goal_xy_tolerance"] = self.goal_xy_tolerance
        if self.goal_yaw_tolerance is not None:
            changes["goal_yaw_tolerance"] = self.goal_yaw_tolerance
        if variant is not None:
            changes["variant"] = Variant.parse(variant)
        changes.update(extra)
        return ControllerConfig.from_mapping({**base.to_dict(), **_coerce_fields(ControllerConfig, changes)})

    def sim_config(self, base: SimConfig | None = None, **extra: Any) -> SimConfig:
        base = base or SimConfig()
        changes = {**self.sim_overrides, **extra}
        return base.replace(**_coerce_fields(SimConfig, changes))

    def make_path(self) -> Path:
        return Path(self.path_points)


@dataclass(frozen=True)
class StepRecord:
    """State at ``t`` after applying ``command`` for one period."""

    t: float
    pose: Pose2D
    command: VelocityCommand
    v: float
    omega: float
    breakdown: RegulationBreakdown
    status: ControllerStatus
    d_O: float


@dataclass
class TrajectoryLog:
    records: list[StepRecord]
    dt: float
    initial_pose: Pose2D
    robot_radius: float
    outcome: str = "running"

    def __len__(self) -> int:
        return len(self.records)

    def positions(self, include_start: bool = True) -> np.ndarray:
        pts = [(r.pose.x, r.pose.y) for r in self.records]
        if include_start:
            pts.insert(0, (self.initial_pose.x, self.initial_pose.y))
        return np.array(pts, dtype=float).reshape(-1, 2)

    def speeds(self) -> np.ndarray:
        return np.array([r.v for r in self.records], dtype=float)


LOG_COLUMNS = (
    "t", "x", "y", "theta", "cmd_v", "cmd_omega", "v", "omega", "status",
    "v_desired", "v_curvature", "v_proximity", "v_combined", "v_goal_scaled",
    "v_final", "kappa", "d_O", "obstacle_distance",
)


def _fmt(value: float) -> str:
    return repr(float(value))


def log_to_csv(log: TrajectoryLog) -> str:
    lines = [",".join(LOG_COLUMNS)]
    for r in log.records:
        b = r.breakdown
        row = [
            _fmt(r.t), _fmt(r.pose.x), _fmt(r.pose.y), _fmt(r.pose.theta),
            _fmt(r.command.v), _fmt(r.command.omega), _fmt(r.v), _fmt(r.omega), r.status.value,
            _fmt(b.v_desired), _fmt(b.v_curvature), _fmt(b.v_proximity), _fmt(b.v_combined),
            _fmt(b.v_goal_scaled), _fmt(b.v_final), _fmt(b.kappa), _fmt(b.d_O),
            _fmt(r.d_O),
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MetricsReport:
    time: float
    distance_traveled: float
    collisions: int
    average_speed: float
    min_distance_to_obstacle: float
    average_distance_to_obstacle: float
    average_distance_to_path: float
    stopped_distance_to_obstacle: float | None
    success: bool
    outcome: str

    def to_text(self) -> str:
        lines = []
        for key, value in dataclasses.asdict(self).items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricsReport":
        data = tomllib.loads(text)
        data.setdefault("stopped_distance_to_obstacle", None)
        return cls(**data)


def _obstacle_distance(df: DistanceField, pose: Pose2D) -> float:
    try:
        return df.at(pose.x, pose.y)
    except OutOfBounds:
        return 0.0


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """True when the motion p1 -> p2 crosses segment q1-q2 or ends on it."""
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d2 == 0:
        lo_x, hi_x = sorted((q1[0], q2[0]))
        lo_y, hi_y = sorted((q1[1], q2[1]))
        return lo_x <= p2[0] <= hi_x and lo_y <= p2[1] <= hi_y
    return False


def distance_to_polyline(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment of ``polyline``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(polyline, dtype=float).reshape(-1, 2)
    if len(poly) == 1:
        return np.hypot(pts[:, 0] - poly[0, 0], pts[:, 1] - poly[0, 1])
    a = poly[:-1]
    d = poly[1:] - a
    len2 = np.einsum("ij,ij->i", d, d)
    best = np.full(len(pts), np.inf)
    for start in range(0, len(pts), 256):
        chunk = pts[start:start + 256]
        rel = chunk[:, None, :] - a[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.einsum("nmj,mj->nm", rel, d) / len2[None, :]
        t = np.where(len2[None, :] > 0, np.clip(t, 0.0, 1.0), 0.0)
        proj = a[None, :, :] + t[..., None] * d[None, :, :]
        dist = np.hypot(chunk[:, None, 0] - proj[..., 0], chunk[:, None, 1] - proj[..., 1])
        best[start:start + 256] = dist.min(axis=1)
    return best


def compute_metrics(log: TrajectoryLog, path: Path | np.ndarray,
                    df: DistanceField | None = None) -> MetricsReport:
    """Experiment metrics for one run.

    Obstacle distances come from the log (they reflect the world as it was at
    each step); ``df`` is only consulted for records logged without one.
    """
    if not log.records:
        raise ValueError("empty trajectory log")
    polyline = path.points if isinstance(path, Path) else np.asarray(path, dtype=float)
    pos = log.positions(include_start=True)
    distance = float(np.sum(np.hypot(*np.diff(pos, axis=0).T)))
    time = log.records[-1].t
    d_obs = np.array([r.d_O for r in log.records], dtype=float)
    if df is not None:
        missing = np.isnan(d_obs)
        for i in np.flatnonzero(missing):
            d_obs[i] = _obstacle_distance(df, log.records[i].pose)
    collisions = int(np.sum(d_obs < log.robot_radius))
    finite = d_obs[np.isfinite(d_obs)]
    avg_obs = float(np.mean(finite)) if len(finite) else math.inf
    min_obs = float(np.min(d_obs))
    to_path = distance_to_polyline(pos[1:], polyline)
    stopped = None
    if log.outcome == "stopped":
        stopped = float(d_obs[-1] - log.robot_radius)
    return MetricsReport(
        time=time,
        distance_traveled=distance,
        collisions=collisions,
        average_speed=distance / time if time > 0 else 0.0,
        min_distance_to_obstacle=min_obs,
        average_distance_to_obstacle=avg_obs,
        average_distance_to_path=float(np.mean(to_path)),
        stopped_distance_to_obstacle=stopped,
        success=log.outcome in SAFE_OUTCOMES and collisions == 0,
        outcome=log.outcome,
    )


def run_scenario(scenario: Scenario, cfg: ControllerConfig,
                 sim: SimConfig | None = None) -> tuple[TrajectoryLog, MetricsReport]:
    """Simulate ``cfg`` tracking the scenario path until it ends.

    A run ends on GoalReached, a collision, an imminent-collision stop held
    for two seconds with the robot at rest, a controller failure, or the
    duration limit.
    """
    sim = sim or SimConfig()
    grid = scenario.grid
    df = compute_distance_field(grid)
    path = scenario.make_path()
    start = scenario.start
    if sim.phase:
        shift = sim.phase * cfg.v_desired * sim.dt
        start = Pose2D(start.x + shift * math.cos(start.theta),
                       start.y + shift * math.sin(start.theta), start.theta)
    state = RobotState(start)
    log = TrajectoryLog([], sim.dt, start, cfg.robot_radius)
    pending = list(scenario.events)
    due: list[Event] = []
    stop_steps = 0
    n_steps = int(round(sim.duration_limit / sim.dt))
    outcome = "timeout"

    for k in range(n_steps):
        if due:
            for ev in due:
                (x0, y0), (x1, y1) = ev.rect
                grid = grid.with_rectangle(x0, y0, x1, y1)
            df = compute_distance_field(grid)
            due = []
        try:
            cmd, status, breakdown = compute_command(state.pose, state.v, path, df, cfg)
        except NoValidPath:
            outcome = "no_valid_path"
            break
        new_state = step_kinematics(state, cmd, sim.dt, sim.a_max, cfg.omega_max)
        d_O = _obstacle_distance(df, new_state.pose)
        log.records.append(StepRecord((k + 1) * sim.dt, new_state.pose, cmd, new_state.v,
                                      new_state.omega, breakdown, status, d_O))
        a = (state.pose.x, state.pose.y)
        b = (new_state.pose.x, new_state.pose.y)
        for ev in list(pending):
            if _segments_intersect(a, b, ev.trigger[0], ev.trigger[1]):
                pending.remove(ev)
                due.append(ev)
        state = new_state

        if d_O < cfg.robot_radius:
            outcome = "collision"
            break
        if status is ControllerStatus.GOAL_REACHED:
            outcome = "goal_reached"
            break
        if status is ControllerStatus.STOPPED_IMMINENT_COLLISION:
            stop_steps += 1
            # the plant may still be braking; only a stop at rest ends the run
            if stop_steps * sim.dt >= STOP_PERSISTENCE - 1e-9 and state.v == 0.0:
                outcome = "stopped"
                break
        else:
            stop_steps = 0

    log.outcome = outcome
    if not log.records:
        # controller failed on the very first cycle
        log.records.append(StepRecord(0.0, state.pose, VelocityCommand(), 0.0, 0.0,
                                      RegulationBreakdown.idle(cfg.v_desired, math.nan),
                                      ControllerStatus.NO_VALID_PATH,
                                      _obstacle_distance(df, state.pose)))
    return log, compute_metrics(log, path, df)


# --- scenario files -------------------------------------------------------

def load_scenario(filename: str | FilePath) -> Scenario:
    """Read a scenario TOML file; relative references resolve next to it."""
    from pursuit_lab import scenarios

    filename = FilePath(filename)
    with open(filename, "rb") as fh:
        doc = tomllib.load(fh)
    base = filename.parent
    sources = [str(filename)]

    generator = doc.get("generator")
    generated = None
    if generator is not None:
        generated = scenarios.generate_scenario(generator, **doc.get("generator_params", {}))

    if "grid" in doc:
        grid_file = base / doc["grid"]
        grid = OccupancyGrid.load(grid_file)
        sources.append(str(grid_file))
    elif generated is not None:
        grid = generated.grid
    else:
        raise ValueError(f"{filename}: scenario needs a 'grid' file or a 'generator'")

    if "path" in doc:
        path_file = base / doc["path"]
        points = Path.from_csv(path_file).points
        sources.append(str(path_file))
    elif generated is not None:
        points = generated.path_points
    else:
        raise ValueError(f"{filename}: scenario needs a 'path' file or a 'generator'")

    if "start" in doc:
        s = doc["start"]
        start = Pose2D(float(s["x"]), float(s["y"]), float(s.get("theta", 0.0)))
    elif generated is not None:
        start = generated.start
    else:
        start = Pose2D(float(points[0][0]), float(points[0][1]), 0.0)

    if "events" in doc:
        events = tuple(_parse_event(e) for e in doc["events"])
    elif generated is not None:
        events = generated.events
    else:
        events = ()

    goal = doc.get("goal", {})
    controller = dict(generated.controller_overrides) if generated else {}
    controller.update(doc.get("controller", {}))
    sim = dict(generated.sim_overrides) if generated else {}
    sim.update(doc.get("sim", {}))
    unknown = set(controller) - set(ControllerConfig.field_names())
    if unknown:
        raise ValueError(f"{filename}: unknown controller keys {sorted(unknown)}")
    unknown = set(sim) - {f.name for f in dataclasses.fields(SimConfig)}
    if unknown:
        raise ValueError(f"{filename}: unknown sim keys {sorted(unknown)}")

    scenario = Scenario(
        name=doc.get("name", filename.stem),
        kind=doc.get("kind", generator or "custom"),
        grid=grid,
        path_points=np.asarray(points, dtype=float),
        start=start,
        events=events,
        goal_xy_tolerance=goal.get("xy_tolerance"),
        goal_yaw_tolerance=goal.get("yaw_tolerance"),
        controller_overrides=controller,
        sim_overrides=sim,
        source_files=tuple(sources),
    )
    validate_scenario(scenario)
    return scenario


def _parse_event(e: Mapping[str, Any]) -> Event:
    (tx0, ty0), (tx1, ty1) = e["trigger"]
    (rx0, ry0), (rx1, ry1) = e["occupy"]
    return Event(((float(tx0), float(ty0)), (float(tx1), float(ty1))),
                 ((float(rx0), float(ry0)), (float(rx1), float(ry1))))


def validate_scenario(scenario: Scenario) -> None:
    s = scenario.start
    if not scenario.grid.in_bounds(s.x, s.y):
        raise ValueError(f"scenario {scenario.name!r}: start pose lies outside the grid")
    p0 = scenario.path_points[0]
    reach = 2.0 * ControllerConfig().lookahead_max
    if math.hypot(p0[0] - s.x, p0[1] - s.y) > reach:
        raise ValueError(f"scenario {scenario.name!r}: path starts more than {reach} m from the start pose")


def write_scenario(scenario: Scenario, directory: str | FilePath) -> FilePath:
    """Write ``scenario.toml``, ``grid.txt`` and ``path.csv`` into ``directory``."""
    directory = FilePath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scenario.grid.save(directory / "grid.txt")
    Path(scenario.path_points).to_csv(directory / "path.csv")
    s = scenario.start
    lines = [
        f'name = "{scenario.name}"',
        f'kind = "{scenario.kind}"',
        'grid = "grid.txt"',
        'path = "path.csv"',
        "",
        "[start]",
        f"x = {s.x!r}",
        f"y = {s.y!r}",
        f"theta = {s.theta!r}",
    ]
    goal = {"xy_tolerance": scenario.goal_xy_tolerance, "yaw_tolerance": scenario.goal_yaw_tolerance}
    goal = {k: v for k, v in goal.items() if v is not None}
    for title, table in (("goal", goal), ("controller", scenario.controller_overrides),
                         ("sim", scenario.sim_overrides)):
        if table:
            lines += ["", f"[{title}]"] + [f"{k} = {_toml_value(v)}" for k, v in table.items()]
    for ev in scenario.events:
        (a, b), (c, d) = ev.trigger, ev.rect
        lines += [
            "",
            "[[events]]",
            f"trigger = [[{_fmt(a[0])}, {_fmt(a[1])}], [{_fmt(b[0])}, {_fmt(b[1])}]]",
            f"occupy = [[{_fmt(c[0])}, {_fmt(c[1])}], [{_fmt(d[0])}, {_fmt(d[1])}]]",
        ]
    out = directory / "scenario.toml"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def run_many(jobs: Sequence[tuple[Scenario, ControllerConfig, SimConfig]],
             workers: int = 1) -> list[tuple[TrajectoryLog, MetricsReport]]:
    """Run independent simulations, optionally on a thread pool; order is preserved."""
    if workers <= 1 or len(jobs) <= 1:
        return [run_scenario(*job) for job in jobs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: run_scenario(*job), jobs))
