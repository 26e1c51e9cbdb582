import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pursuit_lab.collision import OccupancyGrid
from pursuit_lab.controller import ControllerStatus, RegulationBreakdown
from pursuit_lab.core_types import ControllerConfig, Pose2D, Variant, VelocityCommand
from pursuit_lab.scenarios import densify, generate_scenario
from pursuit_lab.simulator import (
    LOG_COLUMNS,
    Event,
    MetricsReport,
    RobotState,
    Scenario,
    SimConfig,
    StepRecord,
    TrajectoryLog,
    compute_metrics,
    distance_to_polyline,
    load_scenario,
    log_to_csv,
    run_many,
    run_scenario,
    step_kinematics,
    write_scenario,
)


def straight_scenario(length=5.0, **kw):
    grid = OccupancyGrid.empty(length + 6.0, 6.0, 0.05, -3.0, -3.0)
    return Scenario("straight", grid, densify([(0, 0), (length, 0)], 0.05), Pose2D(0, 0, 0), **kw)


def make_log(poses, speeds, dt=0.05, d_O=5.0, outcome="goal_reached"):
    records = []
    for k, (p, v) in enumerate(zip(poses[1:], speeds)):
        records.append(StepRecord((k + 1) * dt, p, VelocityCommand(v, 0.0), v, 0.0,
                                  RegulationBreakdown.idle(v, d_O), ControllerStatus.TRACKING, d_O))
    return TrajectoryLog(records, dt, poses[0], 0.25, outcome)


# --- plant ------------------------------------------------------------------

def test_step_from_rest():
    s = step_kinematics(RobotState(Pose2D(0, 0, 0)), VelocityCommand(0.8, 0.0), 0.05, 0.2, 3.2)
    assert s.v == pytest.approx(0.01, rel=1e-12)


def test_step_steady_state():
    s = step_kinematics(RobotState(Pose2D(0, 0, 0), 0.8), VelocityCommand(0.8, 0.0), 0.05, 0.2, 3.2)
    assert s.v == 0.8
    assert s.pose.x == pytest.approx(0.04, rel=1e-12)
    assert s.pose.y == 0.0


def test_ramp_down_takes_one_second():
    s = RobotState(Pose2D(0, 0, 0), 0.2)
    steps = 0
    while s.v != 0.0:
        s = step_kinematics(s, VelocityCommand(0.0, 0.0), 0.05, 0.2, 3.2)
        steps += 1
        assert steps <= 100
    assert steps * 0.05 == pytest.approx(1.0)


def test_step_clamps_omega_and_rejects_bad_dt():
    s = step_kinematics(RobotState(Pose2D(0, 0, 0)), VelocityCommand(0.0, 9.0), 0.05, 0.2, 3.2)
    assert s.omega == 3.2
    assert s.pose.theta == pytest.approx(0.16)
    with pytest.raises(ValueError):
        step_kinematics(RobotState(Pose2D(0, 0, 0)), VelocityCommand(), 0.0, 0.2, 3.2)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-0.8, 0.8), st.floats(-5.0, 5.0)), min_size=1, max_size=60))
def test_plant_respects_limits(cmds):
    s = RobotState(Pose2D(0, 0, 0))
    for v, w in cmds:
        nxt = step_kinematics(s, VelocityCommand(v, w), 0.05, 0.2, 3.2)
        assert abs(nxt.v - s.v) <= 0.2 * 0.05 + 1e-12
        assert -0.8 <= nxt.v <= 0.8
        assert abs(nxt.omega) <= 3.2
        s = nxt


# --- runs -------------------------------------------------------------------

def test_straight_run_matches_trapezoid():
    cfg = ControllerConfig()
    log, m = run_scenario(straight_scenario(), cfg)
    assert log.outcome == "goal_reached" and m.success
    # accelerate 0 -> 0.8 in 4 s covering 1.6 m, then cruise; the goal slowdown only adds time
    assert m.distance_traveled >= 5.0 - cfg.goal_xy_tolerance
    trapezoid = (m.distance_traveled - 1.6) / 0.8 + 4.0
    assert trapezoid - 1e-9 <= m.time <= trapezoid + 5.0
    assert m.collisions == 0
    assert m.average_distance_to_path < 1e-9


def test_timestamps_are_uniform_and_log_is_well_formed():
    log, _ = run_scenario(straight_scenario(), ControllerConfig())
    ts = np.array([r.t for r in log.records])
    np.testing.assert_allclose(np.diff(ts), 0.05, rtol=1e-9)
    speeds = np.concatenate([[0.0], log.speeds()])
    assert np.all(np.abs(np.diff(speeds)) <= 0.2 * 0.05 + 1e-12)
    assert np.all(np.abs(speeds) <= 0.8)


def test_timeout():
    log, m = run_scenario(straight_scenario(20.0), ControllerConfig(), SimConfig(duration_limit=1.0))
    assert log.outcome == "timeout"
    assert not m.success
    assert len(log) == 20


def test_distance_matches_speed_integral():
    log, m = run_scenario(generate_scenario("slalom"), generate_scenario("slalom").controller_config())
    v = np.concatenate([[0.0], np.abs(log.speeds())])
    integral = float(np.sum(0.5 * (v[1:] + v[:-1])) * log.dt)
    assert abs(m.distance_traveled - integral) <= log.dt * 0.8


def test_phase_shifts_start_only():
    sc = straight_scenario()
    a, _ = run_scenario(sc, ControllerConfig(), SimConfig(phase=0.5))
    assert a.initial_pose.x == pytest.approx(0.5 * 0.8 * 0.05)
    with pytest.raises(ValueError):
        SimConfig(phase=1.0)


def test_run_is_deterministic_and_run_many_preserves_order():
    sc = generate_scenario("blind_corner")
    jobs = [(sc, sc.controller_config(v), sc.sim_config()) for v in Variant]
    serial = run_many(jobs, 1)
    threaded = run_many(jobs, 3)
    for (la, ma), (lb, mb) in zip(serial, threaded):
        assert log_to_csv(la) == log_to_csv(lb)
        assert ma == mb


def test_event_fires_once_robot_crosses_trigger():
    sc = straight_scenario(6.0, events=(Event(((1.0, -1.0), (1.0, 1.0)), ((3.0, -1.0), (3.5, 1.0))),))
    cfg = ControllerConfig(collision_horizon=1.0)
    # braking from 0.8 m/s at 0.5 m/s^2 takes 0.64 m, inside the 0.8 m the check looks ahead
    log, m = run_scenario(sc, cfg, SimConfig(a_max=0.5))
    assert log.outcome == "stopped"
    assert m.collisions == 0
    assert m.stopped_distance_to_obstacle > 0
    assert log.records[-1].status is ControllerStatus.STOPPED_IMMINENT_COLLISION
    assert log.records[-1].v == 0.0
    assert m.success
    # before the trigger the world is empty
    first = log.records[0]
    assert first.d_O > 2.0


def test_collision_ends_run_when_checking_is_off():
    sc = straight_scenario(6.0, events=(Event(((1.0, -1.0), (1.0, 1.0)), ((3.0, -3.0), (3.5, 3.0))),))
    log, m = run_scenario(sc, ControllerConfig(use_collision_detection=False))
    assert log.outcome == "collision"
    assert m.collisions == 1 and not m.success


def test_no_valid_path_is_reported():
    sc = straight_scenario()
    sc.path_points = np.array([[0.0, 0.0]])
    log, m = run_scenario(sc, ControllerConfig())
    assert log.outcome in ("goal_reached", "no_valid_path")


# --- metrics ----------------------------------------------------------------

def test_metrics_on_path_is_zero():
    poses = [Pose2D(0.04 * k, 0.0, 0.0) for k in range(10)]
    m = compute_metrics(make_log(poses, [0.8] * 9), densify([(0, 0), (1, 0)], 0.05))
    assert m.average_distance_to_path == pytest.approx(0.0, abs=1e-15)


def test_metrics_constant_offset():
    poses = [Pose2D(0.04 * k, 0.1, 0.0) for k in range(10)]
    m = compute_metrics(make_log(poses, [0.8] * 9), np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert m.average_distance_to_path == pytest.approx(0.1, rel=1e-12)


def test_metrics_average_speed():
    poses = [Pose2D(0, 0, 0), Pose2D(0.02, 0, 0), Pose2D(0.06, 0, 0)]
    m = compute_metrics(make_log(poses, [0.4, 0.8]), np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert m.average_speed == pytest.approx(0.6, rel=1e-12)
    assert m.distance_traveled == pytest.approx(0.06)
    assert m.stopped_distance_to_obstacle is None


def test_metrics_counts_collision_steps_and_stop_distance():
    poses = [Pose2D(0.01 * k, 0, 0) for k in range(4)]
    log = make_log(poses, [0.2] * 3, d_O=0.2, outcome="stopped")
    m = compute_metrics(log, np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert m.collisions == 3
    assert m.stopped_distance_to_obstacle == pytest.approx(0.2 - 0.25)
    assert not m.success


def test_polyline_distance_uses_segment_projection():
    d = distance_to_polyline(np.array([[0.5, 0.3], [2.0, 0.0], [-1.0, 0.0]]),
                             np.array([[0.0, 0.0], [1.0, 0.0]]))
    np.testing.assert_allclose(d, [0.3, 1.0, 1.0])


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_polyline_distance_matches_dense_vertices(px, py):
    poly = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [-1.0, 3.0]])
    dense = densify(poly, 0.001)
    brute = np.min(np.hypot(dense[:, 0] - px, dense[:, 1] - py))
    d = distance_to_polyline(np.array([[px, py]]), poly)[0]
    assert d <= brute + 1e-12
    assert d >= brute - 0.001


def test_empty_log_rejected():
    with pytest.raises(ValueError):
        compute_metrics(TrajectoryLog([], 0.05, Pose2D(0, 0), 0.25), np.zeros((1, 2)))


# --- files ------------------------------------------------------------------

def test_log_csv_columns():
    log, _ = run_scenario(straight_scenario(1.0), ControllerConfig())
    lines = log_to_csv(log).splitlines()
    assert lines[0] == ",".join(LOG_COLUMNS)
    assert len(lines) == len(log) + 1
    assert all(len(line.split(",")) == len(LOG_COLUMNS) for line in lines)
    assert "np." not in log_to_csv(log)


def test_metrics_text_round_trip():
    _, m = run_scenario(straight_scenario(1.0), ControllerConfig())
    assert MetricsReport.from_text(m.to_text()) == m
    stopped = MetricsReport(1.0, 0.5, 0, 0.5, 0.3, 0.4, 0.01, 0.12, True, "stopped")
    assert MetricsReport.from_text(stopped.to_text()) == stopped


@pytest.mark.parametrize("kind", ["step_path", "blind_corner", "slalom", "waypoint_route"])
def test_scenario_file_round_trip(tmp_path, kind):
    sc = generate_scenario(kind)
    f = write_scenario(sc, tmp_path / kind)
    back = load_scenario(f)
    np.testing.assert_array_equal(back.grid.cells, sc.grid.cells)
    np.testing.assert_array_equal(back.path_points, sc.path_points)
    assert back.start == sc.start
    assert back.events == sc.events
    assert back.controller_overrides == sc.controller_overrides
    assert back.sim_overrides == sc.sim_overrides
    cfg = sc.controller_config(Variant.RPP)
    la, _ = run_scenario(sc, cfg, sc.sim_config())
    lb, _ = run_scenario(back, back.controller_config(Variant.RPP), back.sim_config())
    assert log_to_csv(la) == log_to_csv(lb)


def test_scenario_from_generator_reference(tmp_path):
    f = tmp_path / "s.toml"
    f.write_text('generator = "slalom"\n\n[generator_params]\nobstacles = 2\n\n[controller]\nalpha = 0.5\n')
    sc = load_scenario(f)
    assert sc.kind == "slalom"
    assert sc.controller_overrides["alpha"] == 0.5
    assert sc.controller_config().alpha == 0.5


def test_scenario_validation(tmp_path):
    f = tmp_path / "s.toml"
    f.write_text('generator = "slalom"\n\n[start]\nx = 500.0\ny = 0.0\n')
    with pytest.raises(ValueError, match="outside"):
        load_scenario(f)
    f.write_text('generator = "slalom"\n\n[controller]\nbogus = 1\n')
    with pytest.raises(ValueError, match="unknown"):
        load_scenario(f)
    f.write_text('name = "x"\n')
    with pytest.raises(ValueError, match="grid"):
        load_scenario(f)
