import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pursuit_lab.core_types import (
    ControllerConfig,
    NoValidPath,
    Path,
    PathPoint,
    Pose2D,
    Variant,
    VelocityCommand,
    config_to_toml,
    euclidean_distance,
    load_config,
    normalize_angle,
    points_to_robot_frame,
    to_robot_frame,
    to_world_frame,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
angles = st.floats(-50.0, 50.0, allow_nan=False, allow_infinity=False)


# --- normalize_angle --------------------------------------------------------

@pytest.mark.parametrize("a, expected", [(0.0, 0.0), (2 * math.pi, 0.0), (3 * math.pi, math.pi)])
def test_normalize_angle_examples(a, expected):
    assert normalize_angle(a) == pytest.approx(expected, abs=1e-12)


def test_normalize_angle_range_is_half_open():
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(math.pi) == math.pi


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_normalize_angle_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        normalize_angle(bad)


@given(angles)
def test_normalize_angle_idempotent_and_periodic(a):
    n = normalize_angle(a)
    assert -math.pi < n <= math.pi
    assert normalize_angle(n) == pytest.approx(n, abs=1e-12)
    shifted = normalize_angle(a + 2 * math.pi)
    # the two results agree modulo the branch cut
    diff = abs(shifted - n)
    assert min(diff, abs(diff - 2 * math.pi)) < 1e-9
    # same angle
    assert math.cos(n) == pytest.approx(math.cos(a), abs=1e-9)
    assert math.sin(n) == pytest.approx(math.sin(a), abs=1e-9)


# --- value types ------------------------------------------------------------

def test_pose_normalizes_theta():
    assert Pose2D(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    p = Pose2D(1, 2, 7.0)
    assert -math.pi < p.theta <= math.pi


def test_value_types_reject_non_finite():
    with pytest.raises(ValueError):
        PathPoint(math.nan, 0.0)
    with pytest.raises(ValueError):
        Pose2D(math.inf, 0.0)
    with pytest.raises(ValueError):
        VelocityCommand(0.0, math.nan)


# --- frame transforms -------------------------------------------------------

@pytest.mark.parametrize("pose, p, expected", [
    (Pose2D(0, 0, 0), PathPoint(1, 2), (1, 2)),
    (Pose2D(1, 0, math.pi / 2), PathPoint(1, 1), (1, 0)),
    (Pose2D(0, 0, math.pi), PathPoint(1, 0), (-1, 0)),
])
def test_to_robot_frame_examples(pose, p, expected):
    q = to_robot_frame(pose, p)
    assert (q.x, q.y) == pytest.approx(expected, abs=1e-12)


def _homogeneous_oracle(pose: Pose2D, p: PathPoint) -> np.ndarray:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    world_from_robot = np.array([[c, -s, pose.x], [s, c, pose.y], [0, 0, 1]])
    return (np.linalg.inv(world_from_robot) @ np.array([p.x, p.y, 1.0]))[:2]


@given(finite, finite, angles, finite, finite)
def test_to_robot_frame_matches_matrix_oracle(x, y, th, px, py):
    pose, p = Pose2D(x, y, th), PathPoint(px, py)
    q = to_robot_frame(pose, p)
    np.testing.assert_allclose((q.x, q.y), _homogeneous_oracle(pose, p), atol=1e-9)


@given(finite, finite, angles, finite, finite)
def test_frame_round_trip(x, y, th, px, py):
    pose, p = Pose2D(x, y, th), PathPoint(px, py)
    back = to_world_frame(pose, to_robot_frame(pose, p))
    assert back.x == pytest.approx(p.x, abs=1e-9)
    assert back.y == pytest.approx(p.y, abs=1e-9)


@given(finite, finite, angles)
def test_vectorized_transform_matches_scalar(x, y, th):
    pose = Pose2D(x, y, th)
    pts = np.array([[0.0, 0.0], [1.0, -2.0], [x + 3.0, y - 1.0]])
    out = points_to_robot_frame(pose, pts)
    for row, (px, py) in zip(out, pts):
        q = to_robot_frame(pose, PathPoint(px, py))
        assert row[0] == q.x and row[1] == q.y


# --- euclidean_distance -----------------------------------------------------

@pytest.mark.parametrize("a, b, d", [
    ((0, 0), (0, 0), 0.0),
    ((0, 0), (3, 4), 5.0),
    ((1, 1), (2, 2), 1.41421356),
])
def test_euclidean_distance_examples(a, b, d):
    assert euclidean_distance(PathPoint(*a), PathPoint(*b)) == pytest.approx(d, abs=1e-8)


@given(finite, finite, finite, finite, finite, finite)
def test_euclidean_distance_metric_axioms(ax, ay, bx, by, cx, cy):
    a, b, c = PathPoint(ax, ay), PathPoint(bx, by), PathPoint(cx, cy)
    ab = euclidean_distance(a, b)
    assert ab >= 0
    assert ab == euclidean_distance(b, a)
    assert ab <= euclidean_distance(a, c) + euclidean_distance(c, b) + 1e-9
    assert (ab == 0) == (a == b)


# --- Path -------------------------------------------------------------------

def test_path_requires_points():
    with pytest.raises(NoValidPath):
        Path([])


def test_path_is_read_only_and_tracks_arc_length():
    path = Path(np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 5.0]]))
    with pytest.raises(ValueError):
        path.points[0, 0] = 1.0
    assert path.total_length == pytest.approx(6.0)
    assert path.arc_length_between(1, 2) == pytest.approx(1.0)
    assert path[1] == PathPoint(3.0, 4.0)


def test_path_csv_round_trip(tmp_path):
    pts = np.array([[0.0, 0.1], [1.0 / 3.0, -2.5], [1e-17, 7.0]])
    f = tmp_path / "p.csv"
    Path(pts).to_csv(f)
    assert f.read_text().splitlines()[0] == "x,y"
    np.testing.assert_array_equal(Path.from_csv(f).points, pts)


def test_path_csv_header_is_checked(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("a,b\n0,0\n")
    with pytest.raises(ValueError, match="header"):
        Path.from_csv(f)


def test_path_reset_clears_cursor_and_goal():
    path = Path(np.array([[0.0, 0.0], [1.0, 0.0]]))
    path.prune_cursor = 1
    path.goal_reached = True
    path.reset()
    assert path.prune_cursor == 0 and not path.goal_reached


# --- ControllerConfig -------------------------------------------------------

def test_config_defaults_match_hardware_values():
    cfg = ControllerConfig()
    assert cfg.v_max == 0.8
    assert cfg.lookahead_gain == 1.0
    assert (cfg.lookahead_min, cfg.lookahead_max) == (0.25, 1.2)
    assert cfg.fixed_lookahead == 1.2
    assert cfg.omega_max == 3.2
    assert cfg.collision_horizon == 2.0
    assert cfg.variant is Variant.RPP


@pytest.mark.parametrize("changes", [
    {"v_min_floor": 0.0},
    {"v_desired": 1.0},  # above v_max
    {"lookahead_min": 2.0},
    {"alpha": 1.5},
    {"alpha": 0.0},
    {"r_min": 0.0},
    {"d_prox": -1.0},
    {"collision_horizon": 0.0},
    {"far_prune_factor": 0.5},
    {"v_desired": math.nan},
])
def test_config_invariants_are_enforced(changes):
    with pytest.raises(ValueError):
        ControllerConfig().replace(**changes)


def test_variant_parse():
    assert Variant.parse("APP") is Variant.APP
    assert ControllerConfig(variant="pp").variant is Variant.PP
    with pytest.raises(ValueError):
        Variant.parse("mpc")


def test_config_file_round_trip(tmp_path):
    cfg = ControllerConfig(variant=Variant.APP, r_min=1.25, use_interpolation=True)
    f = tmp_path / "c.toml"
    f.write_text(config_to_toml(cfg))
    assert load_config(f) == cfg


def test_config_file_partial_and_int_coercion(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text("[controller]\nr_min = 2\nvariant = \"pp\"\n")
    cfg = load_config(f)
    assert cfg.r_min == 2.0 and isinstance(cfg.r_min, float)
    assert cfg.variant is Variant.PP
    assert cfg.alpha == ControllerConfig().alpha


def test_config_file_rejects_unknown_and_mistyped_keys(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text("[controller]\nr_minn = 2.0\n")
    with pytest.raises(ValueError, match="unknown"):
        load_config(f)
    f.write_text("[controller]\nuse_interpolation = 1\n")
    with pytest.raises(ValueError, match="boolean"):
        load_config(f)
