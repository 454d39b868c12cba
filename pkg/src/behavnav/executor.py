"""Mission execution: walk a plan triplet by triplet under perceptual switching."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .behaviors import aligned_in_corridor, behavior_for_code, classify_place, junction_abreast, perceive, run_behavior
from .expert import ExpertConfig, _corridor_point, _door_vias, expert_trajectory
from .floorplan import FloorPlan, PlaceType, inflate_cspace
from .lmmemory import UNKNOWN, MemoryStore, detect
from .semgraph import BehaviorCode, Plan, SemanticGraph, Triplet, place_kind
from .worldsim import Pose, World


class Failure(str, Enum):
    MISSED_LANDMARK = "MissedLandmark"
    TIMEOUT = "Timeout"
    WRONG_ROOM = "WrongRoom"
    POLICY_DEADLOCK = "PolicyDeadlock"


class Verdict(str, Enum):
    CONTINUE = "continue"
    ADVANCE = "advance"
    FAIL = "fail"


@dataclass(frozen=True)
class Transition:
    verdict: Verdict
    failure: Failure | None = None

    @classmethod
    def cont(cls):
        return cls(Verdict.CONTINUE)

    @classmethod
    def advance(cls):
        return cls(Verdict.ADVANCE)

    @classmethod
    def fail(cls, code: Failure):
        return cls(Verdict.FAIL, code)


@dataclass
class TransitionState:
    """Per-triplet debounce counters plus recent landmark sightings."""
    k: int = 3
    streak: dict = field(default_factory=dict)
    phase: int = 0
    seen: dict = field(default_factory=dict)  # place id -> ticks since last detection
    recall: int = 20  # a landmark seen this many ticks ago still counts
    local: dict = field(default_factory=dict)  # place id -> sightings since the last reset

    def count(self, name: str, cond: bool) -> bool:
        n = self.streak.get(name, 0) + 1 if cond else 0
        self.streak[name] = n
        return n >= self.k

    def reset(self) -> None:
        self.streak.clear()
        self.phase = 0
        self.local.clear()

    def note(self, lmpd: str) -> None:
        for key in list(self.seen):
            self.seen[key] += 1
            if self.seen[key] > self.recall:
                del self.seen[key]
        if lmpd != UNKNOWN:
            self.seen[lmpd] = 0
            self.local[lmpd] = self.local.get(lmpd, 0) + 1


def _entrance_of(place: str) -> str:
    return place  # entrance landmarks carry the EO node name as their place id


def transition_check(active: Triplet, pd_out: PlaceType, lmpd_out: str, graph: SemanticGraph,
                     state: TransitionState | None = None, percept=None, stalled: bool = False) -> Transition:
    """Decide whether the active triplet continues, completes or has failed.

    ``state`` carries debounce counters between ticks; without it every
    pd-driven test needs a single confirming tick.  ``percept`` supplies the
    geometric cues (alignment, side openings) some edges wait for.
    """
    st = state if state is not None else TransitionState(k=1)
    code = active.code
    fam = code.family
    dest = active.to
    pd_out = PlaceType(pd_out)
    aligned = percept is not None and aligned_in_corridor(percept)
    branch = percept is not None and junction_abreast(percept)

    if fam == "cf":
        if place_kind(dest) == "EO":
            if lmpd_out == _entrance_of(dest) or _entrance_of(dest) in st.seen:
                return Transition.advance()
            if st.count("off", pd_out != PlaceType.CORRIDOR) or st.count("end_branch", branch) or stalled:
                return Transition.fail(Failure.MISSED_LANDMARK)
            return Transition.cont()
        # corridor into a hall
        if st.count("hall", pd_out == PlaceType.HALL):
            return Transition.advance()
        if st.count("end_branch", branch) or stalled:
            return Transition.fail(Failure.MISSED_LANDMARK)
        return Transition.cont()

    if fam == "io":
        if pd_out == PlaceType.OFFICE and lmpd_out not in (UNKNOWN, dest) and place_kind(lmpd_out) == "O":
            return Transition.fail(Failure.WRONG_ROOM)
        inside = st.count("office", pd_out == PlaceType.OFFICE)
        if inside and (lmpd_out == dest or dest in st.seen):
            return Transition.advance()
        return Transition.cont()

    if code == BehaviorCode.OOC:
        # crossing ends once the robot stands in the corridor facing the other door
        if st.count("corridor", pd_out == PlaceType.CORRIDOR):
            return Transition.advance()
        return Transition.cont()

    if fam in ("oo", "ch"):
        if st.count("out", pd_out == PlaceType.CORRIDOR and aligned):
            return Transition.advance()
        return Transition.cont()

    if fam == "cc":
        # the destination corridor's entrance landmark settles it; junctions
        # without side openings never raise the branch cue.  Sightings from
        # the previous edge (e.g. across a hall) do not count, and a lone
        # detection may be a false positive.
        if st.local.get(dest, 0) >= 2 and st.count("in", pd_out == PlaceType.CORRIDOR and aligned):
            return Transition.advance()
        if st.phase == 0:
            if st.count("branch", branch):
                st.phase = 1
            return Transition.cont()
        if st.count("out", pd_out == PlaceType.CORRIDOR and aligned and not branch):
            return Transition.advance()
        return Transition.cont()

    raise ValueError(f"no transition rule for {code.value}")


# --------------------------------------------------------------------------
# limits


@dataclass
class ExecLimits:
    per_edge: tuple[int, ...]
    budget: int
    deadlock_window: int = 50
    deadlock_dist: float = 0.3

    def __post_init__(self):
        if any(t <= 0 for t in self.per_edge) or self.budget <= 0:
            raise ValueError("limits must be positive")


def _edge_length(t: Triplet, plan: FloorPlan, graph: SemanticGraph) -> float:
    meta = graph.meta
    fam = t.code.family
    if fam == "oo" or t.code == BehaviorCode.OOC:
        office = plan.rooms[t.frm]
        door = meta["E" + t.frm]["anchor"]
        d = math.dist(office.center, door)
        return d + (2.5 if t.code != BehaviorCode.OOC else 2.0)
    if fam == "cf":
        c = meta[t.frm]
        if t.to in meta and "progress" in meta[t.to] and t.frm in meta[t.to]["progress"]:
            return meta[t.to]["progress"][t.frm] + 1.0
        return (c["hi"] - c["lo"]) + 2.0
    if fam == "io":
        return math.dist(meta[t.frm]["anchor"], plan.rooms[t.to].center) + 3.0
    if fam == "ch":
        h = plan.rooms[t.frm]
        return (h.x1 - h.x0) + (h.y1 - h.y0) + 2.0
    return 6.0  # cc: the junction square plus settling into the new corridor


def default_limits(route: Plan, plan: FloorPlan, graph: SemanticGraph, speed: float = 0.8,
                   dt: float = 0.1, factor: float = 3.0, slack: int = 60) -> ExecLimits:
    """Per edge: ``factor`` times the expert's traversal ticks plus slack; the budget is their sum."""
    per = tuple(int(factor * _edge_length(t, plan, graph) / (speed * dt)) + slack for t in route.triplets)
    return ExecLimits(per_edge=per, budget=max(1, sum(per)))


# --------------------------------------------------------------------------
# missions


@dataclass
class TraceEntry:
    triplet: str
    ticks: int
    outcome: str


@dataclass
class MissionResult:
    success: bool
    behaviors_executed: int
    trace: list[TraceEntry]
    failure: Failure | None = None
    ticks: int = 0

    def report(self, route: Plan | None = None) -> str:
        """Structured text record (one JSON object)."""
        rec = {"success": self.success, "behaviors_executed": self.behaviors_executed,
               "failure": self.failure.value if self.failure else None, "ticks": self.ticks,
               "trace": [[e.triplet, e.ticks, e.outcome] for e in self.trace]}
        if route is not None:
            rec["plan"] = route.to_text()
        return json.dumps(rec, sort_keys=True)


def spawn_pose(plan: FloorPlan, graph: SemanticGraph, route: Plan, rng: np.random.Generator,
               grid=None) -> Pose:
    """Random pose inside the start office facing the expert path's first direction."""
    office = plan.rooms[route.start]
    x = float(rng.uniform(office.x0 + 0.6, office.x1 - 0.6))
    y = float(rng.uniform(office.y0 + 0.6, office.y1 - 0.6))
    if not route.triplets:
        return Pose(x, y, float(rng.uniform(-math.pi, math.pi)))
    first = route.triplets[0]
    meta = graph.meta
    if first.code == BehaviorCode.OOC:
        goal = meta[first.to]["anchor"]
    else:
        goal = _corridor_point(meta, first.to, meta[first.frm]["progress"][first.to] + 1.5)
    grid = grid if grid is not None else inflate_cspace(plan, 0.3)
    traj = expert_trajectory(grid, (x, y), goal, ExpertConfig(), seed=int(rng.integers(2**31)),
                             via=_door_vias(meta, first.frm, True))
    return Pose(x, y, float(traj.theta[0]))


def execute_mission(world: World, graph: SemanticGraph, route: Plan, policies=None,
                    memory: MemoryStore | None = None, limits: ExecLimits | None = None,
                    k: int = 3, trace_writer=None) -> MissionResult:
    """Run ``route`` from the world's current pose.

    ``policies`` maps a BehaviorKind to ``f(obs, subgoal) -> Action``; the
    geometric controllers are used for any kind it leaves out.
    """
    if memory is None:
        raise ValueError("execute_mission needs a landmark memory")
    plan = world.plan
    limits = limits or default_limits(route, plan, graph)
    if len(limits.per_edge) != len(route.triplets):
        raise ValueError("one per-edge limit per triplet is required")
    policies = policies or {}
    trace: list[TraceEntry] = []
    total = 0
    state = TransitionState(k=k)
    history: list[tuple[float, float]] = []

    def finish(success, failure=None, executed=None):
        return MissionResult(success, len(trace) if executed is None else executed, trace, failure, total)

    for idx, t in enumerate(route.triplets):
        kind, sub = behavior_for_code(t.code.value)
        policy = policies.get(kind)
        state.reset()
        history.clear()
        ticks = 0
        while True:
            if total >= limits.budget or ticks >= limits.per_edge[idx]:
                trace.append(TraceEntry(str(t), ticks, Failure.TIMEOUT.value))
                return finish(False, Failure.TIMEOUT)
            obs = world.observe()
            pd_out = classify_place(obs)
            lm = detect(memory, obs.descriptor_grid)
            state.note(lm)
            p = perceive(obs)
            history.append((world.pose.x, world.pose.y))
            w = limits.deadlock_window
            stalled = len(history) > w and math.dist(history[-1], history[-1 - w]) < limits.deadlock_dist
            verdict = transition_check(t, pd_out, lm, graph, state, p, stalled)
            if verdict.verdict is Verdict.ADVANCE:
                trace.append(TraceEntry(str(t), ticks, "advance"))
                break
            if verdict.verdict is Verdict.FAIL:
                trace.append(TraceEntry(str(t), ticks, verdict.failure.value))
                return finish(False, verdict.failure)
            if stalled:
                trace.append(TraceEntry(str(t), ticks, Failure.POLICY_DEADLOCK.value))
                return finish(False, Failure.POLICY_DEADLOCK)
            action = policy(obs, sub) if policy is not None else run_behavior(kind, obs, sub)
            if trace_writer is not None:
                trace_writer.write(world.tick, world.pose, action, t.code.value)
            world.step(action)
            ticks += 1
            total += 1
    if plan.room_at(world.pose.x, world.pose.y) != route.goal:
        return finish(False, Failure.WRONG_ROOM)
    return finish(True)
