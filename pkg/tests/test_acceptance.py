"""Acceptance criteria 1-10.  Each test records a PASS/FAIL line that is
printed in the terminal summary; tolerances are fixed below."""
import contextlib
import io
import math
import time

import networkx as nx
import numpy as np
import pytest

from conftest import ACCEPTANCE

# pinned tolerances and sizes
SCORE_ATOL = 1e-9
SCORE_SHAPES = 500
SCORE_SECONDS = 10.0
GRAD_RTOL = 1e-4
GRAD_H = 1e-5
GRAD_INSTANCES = 20
GRAD_SECONDS = 30.0
PLANNER_GRAPHS = 1000
PLANNER_SECONDS = 30.0
TRIALS = 100
OOB_MIN = 0.96
OO_MAX = 0.80
PD_MIN = 0.982
LMPD_MIN = 0.967
PERCEPT_SAMPLES = 1500
BENCH_SECONDS = 600.0
BENCH_MIN_SUCCESS = 0.812
BENCH_BEHAVIORS = (6.0, 11.0)
RAISED_MAPS = 30
NOISELESS_MISSIONS = 200
RRT_PAIRS = 200
RRT_ORACLE_STEP = 0.005
RRT_EMPTY_RATIO = 1.2


@contextlib.contextmanager
def criterion(k: int, title: str):
    """Record PASS unless the body raises; the body may add detail via the yielded list."""
    detail: list[str] = []
    t0 = time.perf_counter()
    try:
        yield detail
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        ACCEPTANCE[k] = f"criterion {k:2d} FAIL  {title}: {'; '.join(detail + [msg])}"
        raise
    ACCEPTANCE[k] = f"criterion {k:2d} PASS  {title}: {'; '.join(detail)} ({time.perf_counter() - t0:.1f}s)"


# -- 1 ------------------------------------------------------------------------


def brute_force_alpha(raw, F, W, view):
    """Scalar double sum over regions l and keys j of cos(W v_l, F k_ij)."""
    n, m, D = raw.shape
    regions = view.reshape(-1, D).tolist()
    raw, F, W = raw.tolist(), F.tolist(), W.tolist()

    def embed(M, v):
        e = [sum(M[a][b] * v[b] for b in range(D)) for a in range(D)]
        norm = math.sqrt(sum(x * x for x in e))
        return [x / norm for x in e]

    q = [embed(W, v) for v in regions]
    out = []
    for i in range(n):
        keys = [embed(F, raw[i][j]) for j in range(m)]
        total = 0.0
        for ql in q:
            for kj in keys:
                total += sum(ql[a] * kj[a] for a in range(D))
        out.append(total)
    return np.array(out)


def test_c1_score_matches_scalar_double_sum():
    from behavnav.lmmemory import build_memory, score
    with criterion(1, "vectorized score vs scalar double sum") as info:
        rng = np.random.default_rng(1)
        worst = 0.0
        vec_time = 0.0
        for s in range(SCORE_SHAPES):
            # every 50th draw takes the largest shape; the rest are uniform
            big = s % 50 == 0
            n = 8 if big else int(rng.integers(1, 9))
            m = 4 if big else int(rng.integers(1, 5))
            R = 7 if big else int(rng.integers(1, 8))
            D = 64 if big else int(rng.integers(1, 65))
            raw = rng.standard_normal((n, m, D))
            F = rng.standard_normal((D, D))
            W = rng.standard_normal((D, D))
            view = rng.standard_normal((R, R, D))
            mem = build_memory(raw, [f"O{i + 1}" for i in range(n)], F, W)
            tv = time.perf_counter()
            got = score(mem, view).alpha
            vec_time += time.perf_counter() - tv
            worst = max(worst, float(np.abs(got - brute_force_alpha(raw, F, W, view)).max()))
        info.append(f"{SCORE_SHAPES} shapes, max |err| {worst:.2e} (tol {SCORE_ATOL:g}), "
                    f"vectorized time {vec_time:.3f}s")
        assert worst <= SCORE_ATOL
        assert vec_time < SCORE_SECONDS


# -- 2 ------------------------------------------------------------------------


def test_c2_gradients_match_finite_differences():
    from behavnav.lmmemory import loss_and_grad
    with criterion(2, "analytic vs central-difference gradients") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(GRAD_INSTANCES):
            n, m, R, D, B = (int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3)),
                             int(rng.integers(2, 6)), int(rng.integers(1, 4)))
            raw = rng.standard_normal((n, m, D))
            views = rng.standard_normal((B, R, R, D))
            labels = rng.integers(0, n + 1, B)
            F = rng.standard_normal((D, D))
            W = rng.standard_normal((D, D))
            a_unk = float(rng.normal())
            _, dF, dW, _ = loss_and_grad(F, W, raw, views, labels, a_unk)
            for P, G in ((F, dF), (W, dW)):
                num = np.zeros_like(P)
                for idx in np.ndindex(P.shape):
                    old = P[idx]
                    P[idx] = old + GRAD_H
                    lp = loss_and_grad(F, W, raw, views, labels, a_unk)[0]
                    P[idx] = old - GRAD_H
                    lm = loss_and_grad(F, W, raw, views, labels, a_unk)[0]
                    P[idx] = old
                    num[idx] = (lp - lm) / (2 * GRAD_H)
                scale = max(np.linalg.norm(num), np.linalg.norm(G), 1e-12)
                worst = max(worst, float(np.linalg.norm(G - num) / scale))
        elapsed = time.perf_counter() - t0
        info.append(f"{GRAD_INSTANCES} instances, max rel err {worst:.2e} (tol {GRAD_RTOL:g})")
        assert worst <= GRAD_RTOL
        assert elapsed < GRAD_SECONDS


# -- 3 ------------------------------------------------------------------------


def bfs_oracle_hops(graph, start, goal):
    """Shortest hop count over (place, context) states, searched by networkx."""
    g = nx.DiGraph()
    root = (start, None)
    frontier = [root]
    seen = {root}
    while frontier:
        nxt = []
        for state in frontier:
            for t, ctx in graph.successors(*state):
                child = (t.to, ctx)
                g.add_edge(state, child)
                if child not in seen:
                    seen.add(child)
                    nxt.append(child)
        frontier = nxt
    if root not in g:
        return None
    dist = nx.single_source_shortest_path_length(g, root)
    hits = [d for s, d in dist.items() if s[0] == goal]
    return min(hits) if hits else None


def test_c3_planner_matches_bfs_oracle():
    from behavnav.floorplan import GenConfig, GenerationFailed, generate_floorplan
    from behavnav.semgraph import NoRoute, extract_graph, plan_route
    with criterion(3, "plan_route hop counts vs BFS oracle") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(3)
        mismatches = done = skipped = 0
        s = 0
        while done < PLANNER_GRAPHS:
            s += 1
            cfg = GenConfig(n_corridors=int(rng.integers(2, 9)), n_halls=int(rng.integers(0, 3)),
                            offices_per_corridor=int(rng.integers(1, 3)))
            try:
                graph = extract_graph(generate_floorplan(s, cfg))
            except GenerationFailed:
                # e.g. two halls requested on a tree with one interior node
                skipped += 1
                continue
            done += 1
            offices = graph.offices()
            a, b = rng.choice(offices, 2, replace=len(offices) < 2)
            try:
                hops = len(plan_route(graph, a, b))
            except NoRoute:
                hops = None
            expected = 0 if a == b else bfs_oracle_hops(graph, a, b)
            mismatches += hops != expected
        elapsed = time.perf_counter() - t0
        info.append(f"{done} graphs ({skipped} infeasible configs redrawn), {mismatches} mismatches")
        assert mismatches == 0
        assert elapsed < PLANNER_SECONDS


# -- 4 ------------------------------------------------------------------------

REF_PLAN = ["O1 --oor--> C1r", "C1r --cf--> H1", "H1 --chl--> C2r", "C2r --cf--> EO8", "EO8 --ior--> O8"]


def test_c4_worked_example(reference, library, base_memory):
    from behavnav.executor import execute_mission, spawn_pose
    from behavnav.lmmemory import memory_for_plan
    from behavnav.semgraph import plan_route
    from behavnav.worldsim import World, WorldConfig
    with criterion(4, "reference map O1->O8 plan and noiseless mission") as info:
        plan, graph = reference
        route = plan_route(graph, "O1", "O8")
        assert route.to_text().splitlines() == ["S:O1 G:O8"] + REF_PLAN
        world = World(plan, library, WorldConfig(sigma=0.0, eps_pd=0.0),
                      spawn_pose(plan, graph, route, np.random.default_rng(0)), seed=1)
        res = execute_mission(world, graph, route, memory=memory_for_plan(plan, library, base_memory))
        info.append(f"plan matches, success={res.success}, behaviors_executed={res.behaviors_executed}")
        assert res.success and res.behaviors_executed == 5


# -- 5 ------------------------------------------------------------------------


def test_c5_behavior_trials(library):
    from behavnav.bench import run_behavior_trials
    with criterion(5, "behavior trials (100 each, seed 0)") as info:
        acc = {}
        for b in ("cf", "io", "ch", "cc", "oo-b", "oo"):
            acc[b] = run_behavior_trials(b, TRIALS, seed=0, library=library).accuracy
        info.append(" ".join(f"{b}={v:.0%}" for b, v in acc.items()))
        assert all(acc[b] == 1.0 for b in ("cf", "io", "ch", "cc"))
        assert acc["oo-b"] >= OOB_MIN
        assert acc["oo"] <= OO_MAX


# -- 6 ------------------------------------------------------------------------


def test_c6_perception_accuracy(library, base_memory):
    from behavnav.bench import run_behavior_trials
    with criterion(6, "pd / lmpd accuracy, paper-like noise") as info:
        pd = run_behavior_trials("pd", PERCEPT_SAMPLES, seed=7, noise="paper-like", library=library)
        lm = run_behavior_trials("lmpd", PERCEPT_SAMPLES, seed=7, noise="paper-like", library=library,
                                 base_memory=base_memory)
        info.append(f"pd={pd.accuracy:.2%} (min {PD_MIN:.1%}) lmpd={lm.accuracy:.2%} (min {LMPD_MIN:.1%})")
        assert pd.accuracy >= PD_MIN
        assert lm.accuracy >= LMPD_MIN


# -- 7 ------------------------------------------------------------------------


def test_c7_integration_benchmark(library, base_memory):
    from behavnav.bench import BenchConfig, run_benchmark
    with criterion(7, "100x10 benchmark, paper-like; failure codes under raised noise") as info:
        rep = run_benchmark(BenchConfig(), base_memory=base_memory, library=library)
        info.append(f"{rep.total_missions} missions in {rep.wall_clock:.0f}s, success {rep.success_rate:.1%}, "
                    f"mean behaviors {rep.mean_behaviors:.2f}")
        raised = run_benchmark(BenchConfig(n_maps=RAISED_MAPS, noise="raised"), base_memory=base_memory,
                               library=library)
        info.append(f"raised: success {raised.success_rate:.1%}, failures {raised.failures}")
        assert rep.total_missions == 1000
        assert rep.wall_clock < BENCH_SECONDS
        assert rep.success_rate >= BENCH_MIN_SUCCESS
        assert BENCH_BEHAVIORS[0] <= rep.mean_behaviors <= BENCH_BEHAVIORS[1]
        ok = [m for m in rep.missions if m.success]
        assert all(m.behaviors_executed == m.plan_length for m in ok)
        assert raised.failures["MissedLandmark"] > 0 and raised.failures["WrongRoom"] > 0


# -- 8 ------------------------------------------------------------------------


def test_c8_noiseless_missions_all_succeed(library, base_memory):
    from behavnav.bench import BenchConfig, run_benchmark
    with criterion(8, "noiseless missions") as info:
        rep = run_benchmark(BenchConfig(n_maps=NOISELESS_MISSIONS // 10, noise="noiseless", seed=8),
                            base_memory=base_memory, library=library)
        failed = [(m.map_seed, m.start, m.goal, m.failure) for m in rep.missions if not m.success]
        info.append(f"{rep.total_missions - len(failed)}/{rep.total_missions} succeeded")
        assert rep.total_missions == NOISELESS_MISSIONS
        assert not failed, failed[:5]


# -- 9 ------------------------------------------------------------------------


def test_c9_determinism_and_round_trips(tmp_path, library, base_memory, reference):
    from behavnav.bench import BenchConfig, BenchReport, run_benchmark
    from behavnav.expert import generate_expert_dataset, read_dataset, write_dataset
    from behavnav.floorplan import generate_floorplan, load_map, save_map
    from behavnav.lmmemory import load_memory, memory_for_plan, save_memory
    from behavnav.semgraph import Plan, extract_graph, graph_from_text, graph_to_text, plan_route
    from behavnav.worldsim import Action, Pose, TraceWriter, read_trace
    with criterion(9, "byte-identical bench reports; lossless file formats") as info:
        cfg = BenchConfig(n_maps=3, missions_per_map=4, seed=9, noise="raised")
        a = run_benchmark(cfg, base_memory=base_memory, library=library).to_json()
        b = run_benchmark(cfg, base_memory=base_memory, library=library).to_json()
        assert a == b
        assert BenchReport.from_json(a).to_json() == a
        checked = ["bench report"]

        plan = generate_floorplan(9)
        save_map(plan, tmp_path / "m.map")
        back = load_map(tmp_path / "m.map")
        assert np.array_equal(back.kinds, plan.kinds) and back.rooms == plan.rooms
        assert back.landmarks == plan.landmarks
        checked.append("map")

        graph = extract_graph(plan)
        text = graph_to_text(graph)
        assert graph_to_text(graph_from_text(text)) == text
        assert set(graph_from_text(text).triplets) == set(graph.triplets)
        checked.append("graph")

        offices = graph.offices()
        route = plan_route(graph, offices[0], offices[-1])
        assert Plan.from_text(route.to_text()) == route
        checked.append("plan")

        mem = memory_for_plan(plan, library, base_memory)
        save_memory(mem, tmp_path / "m.lmem")
        m2 = load_memory(tmp_path / "m.lmem")
        save_memory(m2, tmp_path / "m2.lmem")
        assert (tmp_path / "m.lmem").read_bytes() == (tmp_path / "m2.lmem").read_bytes()
        assert m2.values == mem.values
        checked.append("memory")

        rplan, rgraph = reference
        recs = generate_expert_dataset(rplan, rgraph, "cf", 1, rng_seed=9)
        write_dataset(recs, str(tmp_path / "d.ndjson"), {"behavior": "cf"})
        _, rows = read_dataset(str(tmp_path / "d.ndjson"))
        assert len(rows) == len(recs)
        assert all(np.array_equal(r["grid"], x.grid.astype(np.float32)) and tuple(r["action"]) == x.action
                   for r, x in zip(rows, recs))
        checked.append("dataset")

        buf = io.StringIO()
        TraceWriter(buf).write(3, Pose(1.25, 2.5, -0.1), Action(0.3, -0.1, 0.2), "cf")
        buf.seek(0)
        rec = read_trace(buf)[0]
        assert (rec["x"], rec["y"], rec["theta"], rec["vx"], rec["vy"], rec["omega"]) == (1.25, 2.5, -0.1, 0.3, -0.1, 0.2)
        checked.append("trace")
        info.append("round trips: " + ", ".join(checked))


# -- 10 -----------------------------------------------------------------------


def oracle_collision_free(grid, waypoints, step=RRT_ORACLE_STEP):
    for p, q in zip(waypoints[:-1], waypoints[1:]):
        n = max(2, int(np.ceil(np.linalg.norm(q - p) / step)) + 1)
        pts = p + np.linspace(0.0, 1.0, n)[:, None] * (q - p)
        ii = np.floor(pts[:, 1] * grid.resolution).astype(int)
        jj = np.floor(pts[:, 0] * grid.resolution).astype(int)
        if grid.occupancy[ii, jj].any():
            return False
    return True


def test_c10_rrt_star_properties():
    from behavnav.expert import NoPath, RRTParams, rrt_star
    from behavnav.floorplan import OccupancyGrid, generate_floorplan, inflate_cspace
    with criterion(10, "RRT* collision-free paths; empty-room optimality") as info:
        rng = np.random.default_rng(10)
        bad = nopath = 0
        for k in range(RRT_PAIRS):
            if k % 20 == 0:
                grid = inflate_cspace(generate_floorplan(1000 + k // 20), 0.3)
                free = np.argwhere(~grid.occupancy)
            a, b = free[rng.integers(len(free), size=2)]
            start = ((a[1] + 0.5) / grid.resolution, (a[0] + 0.5) / grid.resolution)
            goal = ((b[1] + 0.5) / grid.resolution, (b[0] + 0.5) / grid.resolution)
            try:
                path = rrt_star(grid, start, goal, RRTParams(rng_seed=k))
            except NoPath:
                nopath += 1
                continue
            bad += not oracle_collision_free(grid, path.waypoints)
        room = OccupancyGrid(10.0, np.zeros((200, 200), bool), 0.0)
        path = rrt_star(room, (1.0, 1.0), (19.0, 17.0), RRTParams(max_iters=5000, rng_seed=0))
        ratio = path.length / math.hypot(18.0, 16.0)
        info.append(f"{RRT_PAIRS - nopath} paths returned ({nopath} NoPath), {bad} collide; "
                    f"empty-room ratio {ratio:.4f} (max {RRT_EMPTY_RATIO})")
        assert bad == 0
        assert ratio <= RRT_EMPTY_RATIO
