import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from behavnav.expert import (
    ExpertConfig, InvalidEndpoint, NoPath, Path, PurePursuit, RRTParams, UnsupportedBehavior, episode_endpoints,
    generate_expert_dataset, read_dataset, rrt_star, smooth_spline, write_dataset,
)
from behavnav.floorplan import OccupancyGrid
from behavnav.semgraph import BehaviorCode
from behavnav.worldsim import Pose


def empty_room(size=10.0, res=10.0):
    n = int(size * res)
    return OccupancyGrid(res, np.zeros((n, n), bool), 0.0)


def test_start_equals_goal():
    p = rrt_star(empty_room(), (2.0, 2.0), (2.0, 2.0))
    assert len(p) == 1 and p.length == 0.0


def test_endpoint_in_obstacle():
    g = empty_room()
    g.occupancy[20:30, 20:30] = True
    with pytest.raises(InvalidEndpoint):
        rrt_star(g, (2.5, 2.5), (8.0, 8.0))
    with pytest.raises(InvalidEndpoint):
        rrt_star(g, (1.0, 1.0), (50.0, 1.0))


def test_enclosed_goal_has_no_path():
    g = empty_room()
    g.occupancy[60:80, 60] = g.occupancy[60:80, 79] = True
    g.occupancy[60, 60:80] = g.occupancy[79, 60:80] = True
    with pytest.raises(NoPath):
        rrt_star(g, (1.0, 1.0), (7.0, 7.0), RRTParams(max_iters=800))


def test_more_iterations_never_lengthen_the_path():
    g = empty_room(20.0)
    g.occupancy[40:160, 95:105] = True
    lengths = [rrt_star(g, (2.0, 10.0), (18.0, 10.0), RRTParams(max_iters=n, rng_seed=4)).length
               for n in (1000, 2000, 4000)]
    assert lengths[0] >= lengths[1] >= lengths[2]


def test_rrt_is_deterministic():
    g = empty_room()
    a = rrt_star(g, (1.0, 1.0), (9.0, 5.0), RRTParams(max_iters=500, rng_seed=2))
    b = rrt_star(g, (1.0, 1.0), (9.0, 5.0), RRTParams(max_iters=500, rng_seed=2))
    assert np.array_equal(a.waypoints, b.waypoints)


def test_spline_of_collinear_points_stays_on_line():
    tr = smooth_spline(Path(np.array([[0.0, 0.0], [1.0, 1.0], [3.0, 3.0]])))
    assert np.abs(tr.xy[:, 0] - tr.xy[:, 1]).max() < 1e-9
    assert np.allclose(tr.theta, math.pi / 4)


@given(st.lists(st.tuples(st.floats(0, 9), st.floats(0, 9)), min_size=2, max_size=6, unique=True))
@settings(max_examples=40, deadline=None)
def test_spline_endpoints_and_spacing(pts):
    pts = np.array(pts)
    if np.linalg.norm(np.diff(pts, axis=0), axis=1).min() < 0.05:
        return
    tr = smooth_spline(Path(pts), dt=0.1, speed=0.8)
    assert np.allclose(tr.xy[0], pts[0]) and np.allclose(tr.xy[-1], pts[-1])
    steps = np.linalg.norm(np.diff(tr.xy, axis=0), axis=1)
    # constant arc-length spacing except the last partial step
    assert np.all(steps[:-1] <= 0.08 + 1e-3)


def test_pure_pursuit_moves_toward_target():
    tr = smooth_spline(Path(np.array([[1.0, 1.0], [6.0, 1.0]])))
    pp = PurePursuit(tr)
    pose = Pose(1.0, 1.2, 0.3)
    a, k = pp.act(pose)
    tx, ty = tr.xy[k]
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    nx = pose.x + (a.vx * c - a.vy * s) * 0.1
    ny = pose.y + (a.vx * s + a.vy * c) * 0.1
    assert math.hypot(nx - tx, ny - ty) < math.hypot(pose.x - tx, pose.y - ty)


def test_perceptual_codes_have_no_episodes(reference):
    plan, graph = reference
    with pytest.raises(UnsupportedBehavior):
        generate_expert_dataset(plan, graph, "pd", 1)
    with pytest.raises(ValueError):
        episode_endpoints(graph, plan, BehaviorCode("xx"), np.random.default_rng(0))


@pytest.mark.parametrize("code", ["cf", "ool", "ior", "chl", "ccr", "ooc"])
def test_episode_starts_and_goals_are_free(reference, code):
    from behavnav.floorplan import inflate_cspace
    plan, graph = reference
    grid = inflate_cspace(plan, ExpertConfig().inflation)
    rng = np.random.default_rng(1)
    for _ in range(5):
        ep = episode_endpoints(graph, plan, BehaviorCode(code), rng)
        assert grid.is_free(*ep.start) and grid.is_free(*ep.goal)


def test_dataset_round_trip(reference, tmp_path):
    plan, graph = reference
    recs = generate_expert_dataset(plan, graph, "ior", 1, rng_seed=3)
    assert len(recs) % 3 == 0 and {r.jitter for r in recs} == {0, 5, -5}
    path = str(tmp_path / "io.ndjson")
    manifest = write_dataset(recs, path, {"behavior": "ior", "map_seed": plan.seed})
    man, back = read_dataset(path)
    assert man == manifest and man["records"] == len(recs)
    for r, b in zip(recs, back):
        assert np.array_equal(b["grid"], r.grid.astype(np.float32))
        assert tuple(b["action"]) == r.action and tuple(b["pose"]) == r.pose
