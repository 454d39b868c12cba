import math

import numpy as np
import pytest

from behavnav.behaviors import (
    BehaviorKind, Subgoal, aligned_in_corridor, behavior_for_code, perceive, run_behavior,
)
from behavnav.semgraph import BehaviorCode
from behavnav.worldsim import Pose, World, WorldConfig


@pytest.mark.parametrize("code,kind,sub", [
    ("cf", BehaviorKind.CF, None), ("ool", BehaviorKind.OO, Subgoal.LEFT), ("ooc", BehaviorKind.OO, Subgoal.CENTER),
    ("ior", BehaviorKind.IO, Subgoal.RIGHT), ("chs", BehaviorKind.CH, Subgoal.CENTER),
    ("ccc", BehaviorKind.CC, Subgoal.CENTER), ("ccl", BehaviorKind.CC, Subgoal.LEFT),
])
def test_code_mapping(code, kind, sub):
    assert behavior_for_code(code) == (kind, sub)


def test_every_code_maps():
    for code in BehaviorCode:
        kind, _ = behavior_for_code(code.value)
        assert kind.navigational


def test_one_hot_round_trip():
    for s in Subgoal:
        assert Subgoal.from_one_hot(s.one_hot) is s
    with pytest.raises(ValueError):
        Subgoal.from_one_hot([1, 1, 0])


def corridor_world(reference, library, dy=0.0, heading=0.0):
    plan, _ = reference
    c1 = plan.rooms["C1"]
    pose = Pose(c1.x0 + 1.5, c1.center[1] + dy, heading)
    return World(plan, library, WorldConfig(sigma=0.0), pose)


def test_subgoal_arity_enforced(reference, library):
    obs = corridor_world(reference, library).observe()
    with pytest.raises(ValueError):
        run_behavior(BehaviorKind.CF, obs, Subgoal.LEFT)
    with pytest.raises(ValueError):
        run_behavior(BehaviorKind.CH, obs, None)
    with pytest.raises(ValueError):
        run_behavior(BehaviorKind.PD, obs, None)


def test_percept_in_corridor(reference, library):
    p = perceive(corridor_world(reference, library).observe())
    assert abs(p.psi) < 0.05
    assert abs(p.corridor_width - 2.0) < 0.1
    assert aligned_in_corridor(p)


def test_corridor_follow_recentres(reference, library):
    w = corridor_world(reference, library, dy=0.4, heading=math.radians(15))
    centre = w.plan.rooms["C1"].center[1]
    for _ in range(60):
        w.step(run_behavior(BehaviorKind.CF, w.observe()))
    assert abs(w.pose.y - centre) < 0.1
    assert abs(math.sin(w.pose.theta)) < 0.1
    assert w.pose.x > w.plan.rooms["C1"].x0 + 4.0


def test_controller_outputs_are_bounded(reference, library):
    rng = np.random.default_rng(0)
    plan, _ = reference
    h1 = plan.rooms["H1"]
    for _ in range(20):
        pose = Pose(rng.uniform(h1.x0 + 0.5, h1.x1 - 0.5), rng.uniform(h1.y0 + 0.5, h1.y1 - 0.5), rng.uniform(-3, 3))
        obs = World(plan, library, WorldConfig(), pose).observe()
        for kind in (BehaviorKind.CH, BehaviorKind.CC):
            for sub in Subgoal:
                a = run_behavior(kind, obs, sub)
                assert all(math.isfinite(v) for v in (a.vx, a.vy, a.omega))
                assert abs(a.vx) <= 1.0 and abs(a.vy) <= 1.0 and abs(a.omega) <= math.pi / 2
