import numpy as np
import pytest

from pursuit_lab.core_types import Variant
from pursuit_lab.scenarios import SCENARIO_KINDS, densify, generate_scenario
from pursuit_lab.simulator import run_scenario


def column(grid, x):
    ix, _ = grid.cell_of(x, grid.origin_y + 0.5 * grid.resolution)
    return grid.cells[:, ix]


def row(grid, y):
    _, iy = grid.cell_of(grid.origin_x + 0.5 * grid.resolution, y)
    return grid.cells[iy, :]


def runs_of(mask):
    """Lengths of consecutive True runs."""
    out, n = [], 0
    for v in mask:
        if v:
            n += 1
        elif n:
            out.append(n)
            n = 0
    if n:
        out.append(n)
    return out


def test_densify_spacing():
    pts = densify([(0, 0), (1, 0), (1, 0.12)], 0.05)
    steps = np.hypot(*np.diff(pts, axis=0).T)
    assert np.all(steps <= 0.05 + 1e-12)
    assert tuple(pts[-1]) == (1.0, 0.12)
    assert len(densify([(2, 3)], 0.05)) == 1


def test_step_path_point_spacing():
    sc = generate_scenario("step_path", amplitude=2.0, resolution=0.05)
    steps = np.hypot(*np.diff(sc.path_points, axis=0).T)
    np.testing.assert_allclose(steps, 0.05, rtol=1e-9)
    assert np.ptp(sc.path_points[:, 1]) == 2.0
    assert not sc.grid.cells.any()


def test_slalom_dimensions():
    sc = generate_scenario("slalom", corridor_width=1.5, obstacle_size=0.7)
    res = sc.grid.resolution
    # a cross-section between blocks is free for exactly the corridor width
    free_between = ~column(sc.grid, 0.5)
    assert max(runs_of(free_between)) * res == pytest.approx(1.5)
    # a cross-section through the first block: block height and gap
    through = column(sc.grid, 1.5 + 0.35)
    inner = through[int(round(0.5 / res)):-int(round(0.5 / res))]
    assert runs_of(inner)[0] * res == pytest.approx(0.7)
    assert max(runs_of(~inner)) * res == pytest.approx(0.8)
    # along the bottom wall the block spans 0.7 m
    bottom = row(sc.grid, 0.1)
    assert runs_of(bottom[int(round(1.0 / res)):])[0] * res == pytest.approx(0.7)


def test_blind_corner_obstacle_appears_only_after_trigger():
    sc = generate_scenario("blind_corner")
    (ev,) = sc.events
    (x0, y0), (x1, y1) = ev.rect
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    ix, iy = sc.grid.cell_of(cx, cy)
    assert not sc.grid.cells[iy, ix]
    after = sc.grid.with_rectangle(x0, y0, x1, y1)
    assert after.cells[iy, ix]
    # the trigger line lies on the approach leg, before the corner
    (tx0, _), (tx1, _) = ev.trigger
    assert tx0 == tx1 < sc.path_points[:, 0].max()


@pytest.mark.parametrize("kind, params", [
    ("slalom", {"corridor_width": 0.4}),
    ("slalom", {"obstacle_size": 1.2}),
    ("blind_corner", {"corridor_width": 0.3}),
    ("waypoint_route", {"corridor_width": 0.2}),
])
def test_infeasible_geometry_rejected(kind, params):
    with pytest.raises(ValueError, match="narrower"):
        generate_scenario(kind, **params)


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown scenario kind"):
        generate_scenario("maze")


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_path_starts_in_free_space(kind):
    sc = generate_scenario(kind)
    ix, iy = sc.grid.cell_of(*sc.path_points[0])
    assert not sc.grid.cells[iy, ix]
    assert sc.grid.in_bounds(sc.start.x, sc.start.y)


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
@pytest.mark.parametrize("variant", list(Variant))
def test_no_collisions_with_checking_enabled(kind, variant):
    sc = generate_scenario(kind)
    log, m = run_scenario(sc, sc.controller_config(variant), sc.sim_config())
    assert m.collisions == 0
    assert log.outcome in ("goal_reached", "stopped")
    assert m.success
