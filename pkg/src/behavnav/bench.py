"""Per-behavior trials and the multi-map mission benchmark."""
from __future__ import annotations

import functools
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .behaviors import BehaviorKind, Subgoal, behavior_for_code, classify_place, run_behavior
from .expert import COMPASS, ExpertConfig, UnsupportedBehavior, _corridor_point, _door_vias, expert_trajectory
from .floorplan import FloorPlan, GenConfig, PlaceType, generate_floorplan, inflate_cspace
from .lmmemory import UNKNOWN, MemoryStore, detect, memory_for_plan
from .semgraph import BehaviorCode, SemanticGraph, extract_graph, turn_code
from .worldsim import DescriptorLibrary, Pose, World, WorldConfig, wrap_angle


@dataclass(frozen=True)
class NoiseProfile:
    name: str
    sigma: float
    eps_pd: float


NOISE_PROFILES = {
    "noiseless": NoiseProfile("noiseless", 0.0, 0.0),
    "paper-like": NoiseProfile("paper-like", 0.05, 0.01),
    "raised": NoiseProfile("raised", 0.25, 0.05),
}


def noise_profile(name: str | NoiseProfile) -> NoiseProfile:
    if isinstance(name, NoiseProfile):
        return name
    try:
        return NOISE_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown noise profile {name!r}; choose from {sorted(NOISE_PROFILES)}") from None


@functools.lru_cache(maxsize=64)
def map_bundle(seed: int, config: GenConfig | None = None) -> tuple[FloorPlan, SemanticGraph]:
    plan = generate_floorplan(seed, config)
    return plan, extract_graph(plan)


# --------------------------------------------------------------------------
# single-behavior trials


TRIAL_BEHAVIORS = ("cf", "oo", "oo-b", "io", "ch", "cc", "pd", "lmpd")


@dataclass
class TrialOutcome:
    index: int
    map_seed: int
    success: bool
    ticks: int
    reason: str = ""


@dataclass
class TrialReport:
    behavior: str
    n_trials: int
    seed: int
    noise: str
    outcomes: list[TrialOutcome] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return sum(o.success for o in self.outcomes)

    @property
    def accuracy(self) -> float:
        return self.successes / len(self.outcomes) if self.outcomes else 0.0

    def to_dict(self) -> dict:
        return {"behavior": self.behavior, "n_trials": self.n_trials, "seed": self.seed, "noise": self.noise,
                "successes": self.successes, "accuracy": self.accuracy,
                "failures": [asdict(o) for o in self.outcomes if not o.success]}


@dataclass
class Spawn:
    pose: Pose
    code: str  # triplet code that selects controller and subgoal
    done: object  # callable(world) -> None | (bool success, reason)
    limit: int


def _heading_of(compass: int) -> float:
    return math.atan2(COMPASS[compass][1], COMPASS[compass][0])


def _corridor_exit_check(plan: FloorPlan, meta: dict, target: str, depth: float = 1.5, source: str | None = None):
    """Success once the robot is ``depth`` metres into ``target`` heading along it."""
    cid = target[:-1]
    want = _heading_of(meta[target]["heading"])
    anchor = meta[target]["anchor"]
    hx, hy = COMPASS[meta[target]["heading"]]

    def done(world: World):
        p = world.pose
        rid = plan.room_at(p.x, p.y)
        if rid is None or plan.rooms[rid].kind != "corridor":
            return None
        prog = (p.x - anchor[0]) * hx + (p.y - anchor[1]) * hy
        if rid == source:
            return None
        if rid != cid:
            node_far = min(abs(p.x - c) for c in (plan.rooms[rid].x0, plan.rooms[rid].x1)) \
                if plan.rooms[rid].axis == 0 else min(abs(p.y - c) for c in (plan.rooms[rid].y0, plan.rooms[rid].y1))
            return (False, f"entered {rid}") if node_far > depth else None
        if prog >= depth:
            if abs(wrap_angle(p.theta - want)) < 0.35:
                return True, ""
            return None if prog < depth + 3.0 else (False, "heading")
        return None
    return done


def _spawn_cf(plan, graph, rng):
    meta = graph.meta
    cnodes = [n for n in graph.nodes if n.startswith("C")]
    cnode = cnodes[int(rng.integers(len(cnodes)))]
    L = meta[cnode]["hi"] - meta[cnode]["lo"]
    prog = float(rng.uniform(0.5, max(0.6, L - 3.0)))
    x, y = _corridor_point(meta, cnode, prog)
    lat = float(rng.uniform(-0.4, 0.4))
    hx, hy = COMPASS[meta[cnode]["heading"]]
    x, y = x - hy * lat, y + hx * lat
    th = _heading_of(meta[cnode]["heading"]) + math.radians(float(rng.uniform(-20, 20)))
    end = meta[cnode]["end"]

    def done(world):
        return (True, "") if plan.room_at(world.pose.x, world.pose.y) == end else None
    return Spawn(Pose(x, y, th), "cf", done, int((L - prog + 3) / 0.05) + 100)


def _spawn_io(plan, graph, rng):
    meta = graph.meta
    offices = [o.id for o in plan.offices()]
    oid = offices[int(rng.integers(len(offices)))]
    m = meta["E" + oid]
    cid = m["corridor"]
    d = "rl"[int(rng.integers(2))]
    cnode = cid + d
    side = turn_code(meta[cnode]["heading"], m["normal"])
    prog = m["progress"][cnode] - float(rng.uniform(1.7, 2.6))
    x, y = _corridor_point(meta, cnode, max(0.5, prog))
    lat = float(rng.uniform(-0.3, 0.3))
    hx, hy = COMPASS[meta[cnode]["heading"]]
    x, y = x - hy * lat, y + hx * lat
    th = _heading_of(meta[cnode]["heading"]) + math.radians(float(rng.uniform(-10, 10)))

    def done(world):
        rid = plan.room_at(world.pose.x, world.pose.y)
        if rid == oid:
            return True, ""
        if rid is not None and plan.rooms[rid].kind == "office":
            return False, f"entered {rid}"
        return None
    return Spawn(Pose(x, y, th), "io" + side, done, 300)


def _free_point_in(room, rng, margin=0.6):
    return (float(rng.uniform(room.x0 + margin, room.x1 - margin)),
            float(rng.uniform(room.y0 + margin, room.y1 - margin)))


def _spawn_oo(plan, graph, rng, restricted: bool):
    meta = graph.meta
    offices = [o.id for o in plan.offices()]
    oid = offices[int(rng.integers(len(offices)))]
    code = ("oor", "ool")[int(rng.integers(2))]
    target = next(t.to for t in graph.triplets if t.frm == oid and t.code.value == code)
    x, y = _free_point_in(plan.rooms[oid], rng)
    if restricted:
        grid = _grid(plan.seed)
        goal = _corridor_point(meta, target, meta[oid]["progress"][target] + 1.5)
        traj = expert_trajectory(grid, (x, y), goal, ExpertConfig(), seed=int(rng.integers(2**31)),
                                 via=_door_vias(meta, oid, True))
        th = float(traj.theta[0])
    else:
        th = float(rng.uniform(-math.pi, math.pi))
    check = _corridor_exit_check(plan, meta, target, depth=meta[oid]["progress"][target] + 1.0)

    def done(world):
        p = world.pose
        rid = plan.room_at(p.x, p.y)
        if rid is not None and plan.rooms[rid].kind == "office" and rid != oid:
            return False, f"entered {rid}"
        return check(world)
    return Spawn(Pose(x, y, th), code, done, 400)


@functools.lru_cache(maxsize=16)
def _grid(seed: int):
    plan, _ = map_bundle(seed)
    return inflate_cspace(plan, 0.3)


def _spawn_turn(plan, graph, rng, fam: str):
    meta = graph.meta
    if fam == "ch":
        pairs = [(cin.frm, t) for t in graph.triplets if t.code.family == "ch"
                 for cin in graph.triplets if cin.code == BehaviorCode.CF and cin.to == t.frm
                 and turn_code(meta[cin.frm]["heading"], meta[t.to]["heading"]) == t.code.direction]
    else:
        pairs = [(t.frm, t) for t in graph.triplets if t.code.family == "cc"]
    if not pairs:
        raise UnsupportedBehavior(f"map {plan.seed} has no {fam} edge")
    src, t = pairs[int(rng.integers(len(pairs)))]
    L = meta[src]["hi"] - meta[src]["lo"]
    back = float(rng.uniform(1.0, 2.5) if fam == "ch" else rng.uniform(3.0, 5.0))
    x, y = _corridor_point(meta, src, max(0.5, L - back))
    lat = float(rng.uniform(-0.3, 0.3))
    hx, hy = COMPASS[meta[src]["heading"]]
    x, y = x - hy * lat, y + hx * lat
    th = _heading_of(meta[src]["heading"]) + math.radians(float(rng.uniform(-10, 10)))
    return Spawn(Pose(x, y, th), t.code.value, _corridor_exit_check(plan, meta, t.to, source=src[:-1]), 500)


def _spawn(behavior, plan, graph, rng) -> Spawn:
    if behavior == "cf":
        return _spawn_cf(plan, graph, rng)
    if behavior == "io":
        return _spawn_io(plan, graph, rng)
    if behavior in ("oo", "oo-b"):
        return _spawn_oo(plan, graph, rng, restricted=behavior == "oo-b")
    return _spawn_turn(plan, graph, rng, behavior)


def _nav_trial(behavior, index, map_seed, rng, wcfg, library):
    plan, graph = map_bundle(map_seed)
    sp = _spawn(behavior, plan, graph, rng)
    world = World(plan, library, wcfg, sp.pose, seed=int(rng.integers(2**31)))
    kind, sub = behavior_for_code(sp.code)
    for tick in range(sp.limit):
        res = sp.done(world)
        if res is not None:
            return TrialOutcome(index, map_seed, bool(res[0]), tick, res[1])
        world.step(run_behavior(kind, world.observe(), sub))
    return TrialOutcome(index, map_seed, False, sp.limit, "timeout")


def _random_free_pose(plan: FloorPlan, world: World, rng) -> Pose:
    rooms = list(plan.rooms.values())
    while True:
        r = rooms[int(rng.integers(len(rooms)))]
        x, y = _free_point_in(r, rng, margin=0.4)
        p = Pose(x, y, float(rng.uniform(-math.pi, math.pi)))
        if world.pose_valid(p):
            return p


def _landmark_pose(plan: FloorPlan, world: World, rng) -> Pose:
    """A pose 1.5-5 m in front of a random landmark, looking roughly at it."""
    lm = plan.landmarks[int(rng.integers(len(plan.landmarks)))]
    for _ in range(50):
        d = float(rng.uniform(1.0, 5.0))
        lat = float(rng.uniform(-1.0, 1.0))
        x = lm.x + lm.nx * d - lm.ny * lat
        y = lm.y + lm.ny * d + lm.nx * lat
        th = math.atan2(lm.y - y, lm.x - x) + float(rng.uniform(-0.3, 0.3))
        p = Pose(x, y, th)
        if plan.room_at(x, y) is not None and world.pose_valid(p):
            return p
    return _random_free_pose(plan, world, rng)


def _perceptual_trial(behavior, index, map_seed, rng, wcfg, library, memory_cache):
    plan, _ = map_bundle(map_seed)
    world = World(plan, library, wcfg, seed=int(rng.integers(2**31)))
    if behavior == "pd":
        world.pose = _random_free_pose(plan, world, rng)
        truth = world.true_place()
        got = classify_place(world.observe())
        return TrialOutcome(index, map_seed, got == truth, 0, "" if got == truth else f"{got.name}!={truth.name}")
    mem = memory_cache(map_seed)
    world.pose = _landmark_pose(plan, world, rng) if rng.random() < 0.8 else _random_free_pose(plan, world, rng)
    obs = world.observe()
    by_id = {lm.id: lm.place for lm in plan.landmarks}
    truth = UNKNOWN
    if obs.landmark_cells:
        best = max(obs.landmark_cells.items(), key=lambda kv: (kv[1], -kv[0]))
        truth = by_id[best[0]]
    got = detect(mem, obs.descriptor_grid)
    return TrialOutcome(index, map_seed, got == truth, 0, "" if got == truth else f"{got}!={truth}")


def run_behavior_trials(behavior: str, n_trials: int, seed: int = 0, noise: str | NoiseProfile = "noiseless",
                        n_maps: int = 10, base_memory: MemoryStore | None = None,
                        library: DescriptorLibrary | None = None,
                        world_config: WorldConfig | None = None) -> TrialReport:
    """Run ``n_trials`` isolated trials of one behavior over ``n_maps`` generated maps.

    Navigational behaviors run their controller from a spawn pose until a
    ground-truth terminal predicate fires.  ``pd`` and ``lmpd`` score
    single observations; ``lmpd`` needs ``base_memory``.
    """
    behavior = behavior.lower()
    if behavior not in TRIAL_BEHAVIORS:
        raise UnsupportedBehavior(f"{behavior!r}; trials exist for {', '.join(TRIAL_BEHAVIORS)}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    prof = noise_profile(noise)
    wcfg = world_config or WorldConfig()
    wcfg = WorldConfig(**{**asdict(wcfg), "sigma": prof.sigma, "eps_pd": prof.eps_pd})
    library = library or DescriptorLibrary()
    if behavior == "lmpd" and base_memory is None:
        raise ValueError("lmpd trials need a trained base memory")

    @functools.lru_cache(maxsize=None)
    def memory_cache(map_seed):
        plan, _ = map_bundle(map_seed)
        return memory_for_plan(plan, library, base_memory, sigma=max(prof.sigma, 0.05), seed=map_seed)

    report = TrialReport(behavior, n_trials, seed, prof.name)
    for i in range(n_trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i, 0x7A1]))
        map_seed = seed * 1000 + i % n_maps
        if behavior in ("pd", "lmpd"):
            out = _perceptual_trial(behavior, i, map_seed, rng, wcfg, library, memory_cache)
        else:
            out = _nav_trial(behavior, i, map_seed, rng, wcfg, library)
        report.outcomes.append(out)
    return report


def pretrained_memory(library: DescriptorLibrary, cache_dir: str | None = None,
                      config=None) -> MemoryStore:
    """Shared F, W and threshold trained over the whole library, cached on disk.

    The cache key covers the library seed and size and the pretraining config.
    """
    import os
    from .lmmemory import PretrainConfig, load_memory, pretrain, save_memory
    cfg = config or PretrainConfig()
    key = config_hash({"lib": [library.seed, library.size, library.dim, library.background_iso],
                       "cfg": asdict(cfg)})
    cache_dir = cache_dir or os.environ.get("BEHAVNAV_CACHE") or os.path.join(os.path.expanduser("~"), ".cache", "behavnav")
    path = os.path.join(cache_dir, f"memory-{key}.lmem")
    if os.path.exists(path):
        return load_memory(path)
    mem, _ = pretrain(library, cfg)
    os.makedirs(cache_dir, exist_ok=True)
    tmp = path + f".{os.getpid()}.tmp"
    save_memory(mem, tmp)
    os.replace(tmp, path)
    # reload so cached and fresh runs see identical float32 parameters
    return load_memory(path)


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# multi-map mission benchmark


FAILURE_CODES = ("MissedLandmark", "Timeout", "WrongRoom", "PolicyDeadlock")


@dataclass
class BenchConfig:
    n_maps: int = 100
    missions_per_map: int = 10
    seed: int = 0
    noise: str = "paper-like"
    workers: int = 1
    gen: GenConfig | None = None

    def map_seeds(self) -> list[int]:
        return [self.seed * 100_000 + i for i in range(self.n_maps)]

    def check(self) -> None:
        if self.n_maps < 1 or self.missions_per_map < 1:
            raise ValueError("n_maps and missions_per_map must be >= 1")
        noise_profile(self.noise)


@dataclass
class MissionRecord:
    map_seed: int
    start: str
    goal: str
    plan_length: int
    success: bool
    behaviors_executed: int
    failure: str | None
    ticks: int


@dataclass
class BenchReport:
    n_maps: int
    missions_per_map: int
    total_missions: int
    mean_behaviors: float
    success_rate: float
    failures: dict
    config_hash: str
    seeds: list
    noise: str
    missions: list = field(default_factory=list)
    wall_clock: float = 0.0  # informational, left out of the serialized report

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_clock")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        d = json.loads(text)
        d["missions"] = [MissionRecord(**m) for m in d.get("missions", [])]
        return cls(**d)


def _office_pairs(offices: list[str], n: int, rng: np.random.Generator) -> list[tuple[str, str]]:
    """``n`` distinct ordered office pairs drawn uniformly without replacement."""
    k = len(offices)
    total = k * (k - 1)
    if n > total:
        raise ValueError(f"only {total} office pairs on this map, {n} requested")
    out = []
    for flat in rng.choice(total, size=n, replace=False):
        a, b = divmod(int(flat), k - 1)
        out.append((offices[a], offices[b + (b >= a)]))
    return out


def _bench_map(args) -> list[MissionRecord]:
    from .executor import execute_mission, spawn_pose
    from .semgraph import plan_route
    map_seed, cfg, base_memory, library = args
    prof = noise_profile(cfg.noise)
    try:
        plan = generate_floorplan(map_seed, cfg.gen)
    except Exception as exc:
        raise type(exc)(f"map seed {map_seed}: {exc}") from exc
    graph = extract_graph(plan)
    grid = inflate_cspace(plan, 0.3)
    memory = memory_for_plan(plan, library, base_memory, sigma=max(prof.sigma, 0.05), seed=map_seed)
    wcfg = WorldConfig(sigma=prof.sigma, eps_pd=prof.eps_pd)
    rng = np.random.default_rng(np.random.SeedSequence([map_seed, 0xBE7C]))
    offices = sorted((o.id for o in plan.offices()), key=lambda s: (len(s), s))
    records = []
    for j, (a, b) in enumerate(_office_pairs(offices, cfg.missions_per_map, rng)):
        route = plan_route(graph, a, b)
        pose = spawn_pose(plan, graph, route, rng, grid=grid)
        world = World(plan, library, wcfg, pose, seed=int(rng.integers(2**31)))
        res = execute_mission(world, graph, route, memory=memory)
        records.append(MissionRecord(map_seed, a, b, len(route.triplets), res.success,
                                     res.behaviors_executed, res.failure.value if res.failure else None,
                                     res.ticks))
    return records


def run_benchmark(config: BenchConfig | None = None, base_memory: MemoryStore | None = None,
                  library: DescriptorLibrary | None = None, progress=None) -> BenchReport:
    """Generate maps, run random office-to-office missions on each and aggregate.

    Results depend only on the config: maps are reduced in seed order whether
    they ran in-process or in a worker pool.
    """
    import time
    cfg = config or BenchConfig()
    cfg.check()
    library = library or DescriptorLibrary()
    base_memory = base_memory or pretrained_memory(library)
    t0 = time.perf_counter()
    jobs = [(s, cfg, base_memory, library) for s in cfg.map_seeds()]
    if cfg.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_map = list(pool.map(_bench_map, jobs))
    else:
        per_map = []
        for job in jobs:
            per_map.append(_bench_map(job))
            if progress is not None:
                progress(len(per_map), len(jobs), per_map[-1])
    records = [r for recs in per_map for r in recs]
    ok = [r for r in records if r.success]
    failures = {code: 0 for code in FAILURE_CODES}
    for r in records:
        if r.failure:
            failures[r.failure] += 1
    gen = asdict(cfg.gen or GenConfig())
    chash = config_hash({"bench": {k: v for k, v in asdict(cfg).items() if k not in ("workers", "gen")},
                         "gen": gen, "lib": [library.seed, library.size, library.dim]})
    return BenchReport(
        n_maps=cfg.n_maps, missions_per_map=cfg.missions_per_map, total_missions=len(records),
        mean_behaviors=float(np.mean([r.behaviors_executed for r in ok])) if ok else 0.0,
        success_rate=len(ok) / len(records), failures=failures, config_hash=chash,
        seeds=cfg.map_seeds(), noise=cfg.noise, missions=records,
        wall_clock=time.perf_counter() - t0)
