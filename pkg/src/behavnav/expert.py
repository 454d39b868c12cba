"""Expert trajectories and imitation datasets.

RRT* plans over the inflated C-space, a natural cubic spline smooths the
waypoints, and a pure-pursuit tracker turns the smoothed trajectory into
velocity labels while the world is rolled forward.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .floorplan import FloorPlan, OccupancyGrid, inflate_cspace
from .semgraph import BehaviorCode, SemanticGraph, turn_code
from .worldsim import Action, DescriptorLibrary, Pose, World, WorldConfig, wrap_angle


class NoPath(RuntimeError):
    """RRT* spent its iteration budget without reaching the goal."""


class InvalidEndpoint(ValueError):
    pass


class UnsupportedBehavior(ValueError):
    pass


COMPASS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


# --------------------------------------------------------------------------
# RRT*


@dataclass
class RRTParams:
    max_iters: int = 5000
    step_size: float = 1.0
    goal_bias: float = 0.05
    # cap on the shrinking neighbor ball r = min(gamma * sqrt(log n / n), rewire_radius)
    rewire_radius: float = 3.0
    # gamma = rewire_gamma * sqrt(free area); 2 * sqrt(1.5 / pi) ~ 1.38 is the asymptotic bound
    rewire_gamma: float = 1.5
    rng_seed: int = 0


@dataclass
class Path:
    waypoints: np.ndarray  # (n, 2)

    @property
    def length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())

    def __len__(self) -> int:
        return len(self.waypoints)


@numba.njit(cache=True)
def _free(occ, res, x, y):
    i = int(math.floor(y * res))
    j = int(math.floor(x * res))
    if i < 0 or j < 0 or i >= occ.shape[0] or j >= occ.shape[1]:
        return False
    return not occ[i, j]


@numba.njit(cache=True)
def _seg_free(occ, res, x0, y0, x1, y1):
    """Exact test: walks every grid cell the segment touches."""
    gx0, gy0 = x0 * res, y0 * res
    gx1, gy1 = x1 * res, y1 * res
    i = int(math.floor(gy0))
    j = int(math.floor(gx0))
    ie = int(math.floor(gy1))
    je = int(math.floor(gx1))
    h, w = occ.shape
    dx = gx1 - gx0
    dy = gy1 - gy0
    sj = 1 if dx > 0 else -1
    si = 1 if dy > 0 else -1
    tdx = abs(1.0 / dx) if dx != 0 else np.inf
    tdy = abs(1.0 / dy) if dy != 0 else np.inf
    tx = ((j + 1 - gx0) if dx > 0 else (gx0 - j)) * tdx if dx != 0 else np.inf
    ty = ((i + 1 - gy0) if dy > 0 else (gy0 - i)) * tdy if dy != 0 else np.inf
    for _ in range(abs(ie - i) + abs(je - j) + 2):
        if i < 0 or j < 0 or i >= h or j >= w or occ[i, j]:
            return False
        if i == ie and j == je:
            return True
        if abs(tx - ty) < 1e-12:
            # passing exactly through a corner touches both neighbours
            if j + sj < 0 or j + sj >= w or occ[i, j + sj]:
                return False
            if i + si < 0 or i + si >= h or occ[i + si, j]:
                return False
            j += sj
            i += si
            tx += tdx
            ty += tdy
        elif tx < ty:
            j += sj
            tx += tdx
        else:
            i += si
            ty += tdy
    return i == ie and j == je and not occ[i, j]


@numba.njit(cache=True)
def _rrt_star_kernel(occ, res, free_ij, u, sx, sy, gx, gy, step, goal_bias, r_max, gamma):
    n_iter = u.shape[0]
    cap = n_iter + 1
    X = np.empty(cap)
    Y = np.empty(cap)
    parent = np.full(cap, -1, np.int64)
    cost = np.zeros(cap)
    first_child = np.full(cap, -1, np.int64)
    next_sib = np.full(cap, -1, np.int64)
    near_goal = np.zeros(cap, np.bool_)
    X[0] = sx
    Y[0] = sy
    n = 1
    if math.hypot(gx - sx, gy - sy) <= step and _seg_free(occ, res, sx, sy, gx, gy):
        near_goal[0] = True
    nbr = np.empty(cap, np.int64)
    stack = np.empty(cap, np.int64)
    for it in range(n_iter):
        if u[it, 0] < goal_bias:
            qx, qy = gx, gy
        else:
            c = int(u[it, 1] * free_ij.shape[0])
            if c >= free_ij.shape[0]:
                c = free_ij.shape[0] - 1
            qx = (free_ij[c, 1] + u[it, 2]) / res
            qy = (free_ij[c, 0] + u[it, 3]) / res
        best = 0
        bd = 1e300
        for k in range(n):
            d = (X[k] - qx) ** 2 + (Y[k] - qy) ** 2
            if d < bd:
                bd = d
                best = k
        bd = math.sqrt(bd)
        if bd < 1e-9:
            continue
        if bd > step:
            nx = X[best] + (qx - X[best]) * step / bd
            ny = Y[best] + (qy - Y[best]) * step / bd
        else:
            nx, ny = qx, qy
        if not _free(occ, res, nx, ny) or not _seg_free(occ, res, X[best], Y[best], nx, ny):
            continue
        nn = n + 1
        r = min(gamma * math.sqrt(math.log(nn) / nn), r_max)
        r = max(r, step)
        m = 0
        for k in range(n):
            if (X[k] - nx) ** 2 + (Y[k] - ny) ** 2 <= r * r:
                nbr[m] = k
                m += 1
        p = best
        pc = cost[best] + math.hypot(nx - X[best], ny - Y[best])
        for a in range(m):
            k = nbr[a]
            c2 = cost[k] + math.hypot(nx - X[k], ny - Y[k])
            if c2 < pc - 1e-12 and _seg_free(occ, res, X[k], Y[k], nx, ny):
                p = k
                pc = c2
        v = n
        X[v] = nx
        Y[v] = ny
        parent[v] = p
        cost[v] = pc
        next_sib[v] = first_child[p]
        first_child[p] = v
        n += 1
        if math.hypot(gx - nx, gy - ny) <= step and _seg_free(occ, res, nx, ny, gx, gy):
            near_goal[v] = True
        # rewire the neighborhood through the new node
        for a in range(m):
            k = nbr[a]
            if k == p:
                continue
            c2 = pc + math.hypot(nx - X[k], ny - Y[k])
            if c2 < cost[k] - 1e-12 and _seg_free(occ, res, nx, ny, X[k], Y[k]):
                old = parent[k]
                # unlink k from its old parent's child list
                prev = -1
                ch = first_child[old]
                while ch != k:
                    prev = ch
                    ch = next_sib[ch]
                if prev < 0:
                    first_child[old] = next_sib[k]
                else:
                    next_sib[prev] = next_sib[k]
                parent[k] = v
                next_sib[k] = first_child[v]
                first_child[v] = k
                delta = c2 - cost[k]
                top = 0
                stack[0] = k
                top = 1
                while top > 0:
                    top -= 1
                    w = stack[top]
                    cost[w] += delta
                    ch = first_child[w]
                    while ch >= 0:
                        stack[top] = ch
                        top += 1
                        ch = next_sib[ch]
    goal_parent = -1
    gbest = 1e300
    for k in range(n):
        if near_goal[k]:
            c2 = cost[k] + math.hypot(gx - X[k], gy - Y[k])
            if c2 < gbest:
                gbest = c2
                goal_parent = k
    return X[:n].copy(), Y[:n].copy(), parent[:n].copy(), goal_parent


def rrt_star(grid: OccupancyGrid, start, goal, params: RRTParams | None = None) -> Path:
    """Asymptotically optimal sampling planner over ``grid``.

    The random stream is drawn up front, so a larger ``max_iters`` extends
    the same tree and the returned length can only shrink.
    """
    params = params or RRTParams()
    sx, sy = map(float, start)
    gx, gy = map(float, goal)
    for name, (x, y) in (("start", (sx, sy)), ("goal", (gx, gy))):
        if not (math.isfinite(x) and math.isfinite(y)) or not grid.is_free(x, y):
            raise InvalidEndpoint(f"{name} ({x:.3f}, {y:.3f}) is not in free space")
    if math.hypot(gx - sx, gy - sy) < 1e-9:
        return Path(np.array([[sx, sy]]))
    occ = np.ascontiguousarray(grid.occupancy)
    res = float(grid.resolution)
    free_ij = np.argwhere(~occ).astype(np.int64)
    area = len(free_ij) / res**2
    gamma = params.rewire_gamma * math.sqrt(area)
    rng = np.random.default_rng(np.random.SeedSequence([params.rng_seed, 0x5277]))
    u = rng.random((int(params.max_iters), 4))
    X, Y, parent, gp = _rrt_star_kernel(occ, res, free_ij, u, sx, sy, gx, gy, float(params.step_size),
                                        float(params.goal_bias), float(params.rewire_radius), gamma)
    if gp < 0:
        raise NoPath(f"no connection after {params.max_iters} iterations")
    pts = [(gx, gy)]
    k = gp
    while k >= 0:
        pts.append((X[k], Y[k]))
        k = parent[k]
    pts.reverse()
    wp = np.array(pts, dtype=float)
    wp[0] = (sx, sy)
    # drop a duplicate goal when the tree already holds it
    if len(wp) > 2 and np.hypot(*(wp[-1] - wp[-2])) < 1e-12:
        wp = np.delete(wp, -2, axis=0)
    return Path(wp)


# --------------------------------------------------------------------------
# smoothing


@dataclass
class Trajectory:
    xy: np.ndarray  # (N, 2)
    theta: np.ndarray  # (N,) path tangent
    dt: float
    speed: float

    def __len__(self) -> int:
        return len(self.xy)

    @property
    def poses(self) -> list[Pose]:
        return [Pose(float(x), float(y), float(t)) for (x, y), t in zip(self.xy, self.theta)]


def _segment_samples(a: float, b: float, length: float, density: float) -> np.ndarray:
    n = max(2, int(math.ceil(length * density)) + 1)
    return np.linspace(a, b, n)


def smooth_spline(path: Path, grid: OccupancyGrid | None = None, dt: float = 0.1,
                  speed: float = 0.8, density: float = 50.0) -> Trajectory:
    """Natural cubic spline through the waypoints, resampled at constant speed.

    Segments whose spline leaves free space fall back to the straight chord.
    """
    wp = np.asarray(path.waypoints, dtype=float)
    if len(wp) < 2:
        raise ValueError("need at least two waypoints")
    chord = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    keep = np.concatenate([[True], chord > 1e-12])
    wp = wp[keep]
    if len(wp) < 2:
        return Trajectory(wp[:1].copy(), np.zeros(1), dt, speed)
    chord = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(chord)])
    spline = CubicSpline(t, wp, bc_type="natural")
    dense = []
    for i in range(len(wp) - 1):
        ts = _segment_samples(t[i], t[i + 1], chord[i], density)
        seg = spline(ts)
        if grid is not None:
            ok = all(grid.is_free(x, y) for x, y in seg)
            if not ok:
                a = (ts - t[i]) / chord[i]
                seg = wp[i] + a[:, None] * (wp[i + 1] - wp[i])
        seg[0] = wp[i]
        seg[-1] = wp[i + 1]
        dense.append(seg if i == 0 else seg[1:])
    dense = np.vstack(dense)
    ds = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(ds)])
    total = s[-1]
    step = speed * dt
    n = int(math.floor(total / step + 1e-9))
    sq = np.concatenate([np.arange(n + 1) * step, [total]]) if total - n * step > 1e-9 else np.arange(n + 1) * step
    sq[-1] = total
    xy = np.column_stack([np.interp(sq, s, dense[:, 0]), np.interp(sq, s, dense[:, 1])])
    xy[0] = wp[0]
    xy[-1] = wp[-1]
    # tangent from the dense polyline just ahead of each sample
    idx = np.clip(np.searchsorted(s, sq, side="right"), 1, len(dense) - 1)
    d = dense[idx] - dense[idx - 1]
    theta = np.arctan2(d[:, 1], d[:, 0])
    return Trajectory(xy, theta, dt, speed)


# --------------------------------------------------------------------------
# pure-pursuit expert


@dataclass
class ExpertConfig:
    lookahead: float = 0.5
    speed: float = 0.8
    k_heading: float = 2.0
    goal_tol: float = 0.1
    jitter_deg: float = 5.0
    inflation: float = 0.3
    rrt: RRTParams = field(default_factory=lambda: RRTParams(max_iters=3000, step_size=0.75))
    max_ticks: int = 1500


class PurePursuit:
    """Tracks a trajectory with a fixed lookahead; holonomic velocity in the robot frame."""

    def __init__(self, traj: Trajectory, lookahead: float = 0.5, speed: float = 0.8, k_heading: float = 2.0):
        self.traj = traj
        self.lookahead = lookahead
        self.speed = speed
        self.k_heading = k_heading
        self.index = 0

    def target(self, pose: Pose, advance: bool = True) -> int:
        xy = self.traj.xy
        lo = self.index
        hi = min(len(xy), lo + 40)
        d = np.hypot(xy[lo:hi, 0] - pose.x, xy[lo:hi, 1] - pose.y)
        near = lo + int(np.argmin(d))
        if advance:
            self.index = near
        far = np.hypot(xy[near:, 0] - pose.x, xy[near:, 1] - pose.y)
        ahead = np.nonzero(far >= self.lookahead)[0]
        return near + int(ahead[0]) if len(ahead) else len(xy) - 1

    def action_to(self, pose: Pose, k: int) -> Action:
        tx, ty = self.traj.xy[k]
        dx, dy = tx - pose.x, ty - pose.y
        dist = math.hypot(dx, dy)
        v = min(self.speed, dist / self.traj.dt) if dist > 0 else 0.0
        c, s = math.cos(pose.theta), math.sin(pose.theta)
        if dist > 0:
            ux, uy = dx / dist, dy / dist
            vx, vy = v * (c * ux + s * uy), v * (-s * ux + c * uy)
        else:
            vx = vy = 0.0
        omega = self.k_heading * wrap_angle(float(self.traj.theta[k]) - pose.theta)
        return Action(vx, vy, omega)

    def act(self, pose: Pose) -> tuple[Action, int]:
        k = self.target(pose)
        return self.action_to(pose, k), k


# --------------------------------------------------------------------------
# episode geometry


def _corridor_point(meta: dict, cnode: str, progress: float) -> tuple[float, float]:
    m = meta[cnode]
    a = m["anchor"]
    hx, hy = COMPASS[m["heading"]]
    return a[0] + hx * progress, a[1] + hy * progress


def _corridor_length(meta: dict, cnode: str) -> float:
    return float(meta[cnode]["hi"] - meta[cnode]["lo"])


def _door_vias(meta: dict, office: str, outward: bool) -> list[tuple[float, float]]:
    """Points just inside the office, in the doorway and just outside, in travel order."""
    m = meta["E" + office]
    ax, ay = m["anchor"]
    nx, ny = COMPASS[m["normal"]]  # corridor -> office
    pts = [(ax + 0.9 * nx, ay + 0.9 * ny), (ax, ay), (ax - 0.9 * nx, ay - 0.9 * ny)]
    return pts[::-1] if not outward else pts


@dataclass
class Episode:
    start: tuple[float, float]
    goal: tuple[float, float]
    heading: float
    edge: str
    via: list = field(default_factory=list)


def episode_endpoints(graph: SemanticGraph, plan: FloorPlan, code: BehaviorCode,
                      rng: np.random.Generator) -> Episode:
    """Sample start, goal, start heading hint and door via-points for one behavior episode."""
    meta = graph.meta
    code = BehaviorCode(code)
    fam = code.family
    if fam in ("pd", "lmpd"):
        raise UnsupportedBehavior(code.value)
    if fam == "cf":
        cands = [t for t in graph.triplets if t.code == BehaviorCode.CF]
    else:
        cands = [t for t in graph.triplets if t.code == code]
    if fam == "ch":
        cands = [(t, cin) for t in cands for cin in graph.triplets
                 if cin.code == BehaviorCode.CF and cin.to == t.frm
                 and turn_code(meta[cin.frm]["heading"], meta[t.to]["heading"]) == code.direction]
    if not cands:
        raise UnsupportedBehavior(f"map has no {code.value} edge")
    pick = cands[int(rng.integers(len(cands)))]
    if fam == "ch":
        t, cin = pick
    else:
        t, cin = pick, None
    via: list = []
    if fam == "cf":
        L = _corridor_length(meta, t.frm)
        if t.to.startswith("EO"):
            end = meta[t.to]["progress"][t.frm] - 0.5
        else:
            end = L + 1.0
        p0 = float(rng.uniform(0.5, max(0.6, end - 3.0)))
        start = _corridor_point(meta, t.frm, p0)
        goal = _corridor_point(meta, t.frm, end)
    elif code == BehaviorCode.OOC:
        start = plan.rooms[t.frm].center
        goal = plan.rooms[t.to[1:]].center
        via = _door_vias(meta, t.frm, True) + _door_vias(meta, t.to[1:], False)
    elif fam == "oo":
        office = plan.rooms[t.frm]
        start = office.center
        prog = meta[t.frm]["progress"][t.to]
        goal = _corridor_point(meta, t.to, prog + 1.5)
        via = _door_vias(meta, t.frm, True)
    elif fam == "io":
        m = meta[t.frm]
        # the corridor direction that puts the door on the subgoal side
        cid = m["corridor"]
        cnode = None
        for d in "rl":
            h = meta[cid + d]["heading"]
            if turn_code(h, m["normal"]) == code.direction:
                cnode = cid + d
        if cnode is None:
            raise UnsupportedBehavior(code.value)
        prog = m["progress"][cnode]
        start = _corridor_point(meta, cnode, max(0.5, prog - float(rng.uniform(2.0, 3.0))))
        goal = plan.rooms[t.to].center
        via = _door_vias(meta, t.to, False)
    elif fam in ("ch", "cc"):
        src = cin.frm if fam == "ch" else t.frm
        L = _corridor_length(meta, src)
        start = _corridor_point(meta, src, max(0.5, L - float(rng.uniform(2.5, 4.0))))
        goal = _corridor_point(meta, t.to, 2.0)
    else:
        raise UnsupportedBehavior(code.value)
    pts = [start] + list(via) + [goal]
    heading = math.atan2(pts[1][1] - pts[0][1], pts[1][0] - pts[0][0])
    return Episode((float(start[0]), float(start[1])), (float(goal[0]), float(goal[1])), heading, str(t),
                   [(float(x), float(y)) for x, y in via])


def crop_grid(grid: OccupancyGrid, pts, margin: float = 4.0) -> tuple[OccupancyGrid, np.ndarray]:
    """Sub-grid covering ``pts`` plus ``margin``; returns it with its metre offset."""
    pts = np.asarray(pts, float)
    res = grid.resolution
    h, w = grid.occupancy.shape
    j0 = max(0, int(math.floor((pts[:, 0].min() - margin) * res)))
    i0 = max(0, int(math.floor((pts[:, 1].min() - margin) * res)))
    j1 = min(w, int(math.ceil((pts[:, 0].max() + margin) * res)))
    i1 = min(h, int(math.ceil((pts[:, 1].max() + margin) * res)))
    sub = OccupancyGrid(res, grid.occupancy[i0:i1, j0:j1], grid.inflation_radius)
    return sub, np.array([j0 / res, i0 / res])


def plan_polyline(grid: OccupancyGrid, pts, params: RRTParams, margin: float = 4.0) -> Path:
    """Chain of straight legs where free, local RRT* for the rest."""
    pts = [np.asarray(p, float) for p in pts]
    out = [pts[0]]
    for k, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        if grid.segment_free(a, b):
            out.append(b)
            continue
        sub, off = crop_grid(grid, [a, b], margin)
        try:
            leg = rrt_star(sub, a - off, b - off, RRTParams(**{**asdict(params), "rng_seed": params.rng_seed + k}))
        except NoPath:
            leg = rrt_star(grid, a, b, RRTParams(**{**asdict(params), "rng_seed": params.rng_seed + k}))
            off = np.zeros(2)
        out.extend(leg.waypoints[1:] + off)
    wp = np.array(out)
    keep = np.concatenate([[True], np.linalg.norm(np.diff(wp, axis=0), axis=1) > 1e-9])
    return Path(wp[keep])


def expert_trajectory(grid: OccupancyGrid, start, goal, cfg: ExpertConfig, seed: int = 0,
                      dt: float = 0.1, via=()) -> Trajectory:
    """Plan start -> via... -> goal and spline-smooth it."""
    params = RRTParams(**{**asdict(cfg.rrt), "rng_seed": seed})
    path = plan_polyline(grid, [start, *via, goal], params)
    if len(path) < 2:
        return Trajectory(path.waypoints.copy(), np.zeros(1), dt, cfg.speed)
    return smooth_spline(path, grid, dt=dt, speed=cfg.speed)


# --------------------------------------------------------------------------
# datasets


@dataclass
class DatasetRecord:
    behavior: str
    subgoal: str
    episode: int
    tick: int
    jitter: int  # degrees: 0, +5 or -5
    pose: tuple[float, float, float]
    target: tuple[float, float]
    action: tuple[float, float, float]
    rays: np.ndarray
    grid: np.ndarray | None = None
    grid_offset: int = -1

    def to_json(self) -> dict:
        return {"behavior": self.behavior, "subgoal": self.subgoal, "episode": self.episode,
                "tick": self.tick, "jitter": self.jitter, "pose": list(self.pose),
                "target": list(self.target), "action": list(self.action),
                "rays": [round(float(r), 5) for r in self.rays], "grid_offset": self.grid_offset}


def _subgoal_letter(code: BehaviorCode) -> str:
    d = code.direction
    return {"l": "left", "r": "right"}.get(d, "center")


def generate_expert_dataset(plan: FloorPlan, graph: SemanticGraph, behavior, n_paths: int,
                            rng_seed: int = 0, library: DescriptorLibrary | None = None,
                            world_config: WorldConfig | None = None,
                            config: ExpertConfig | None = None,
                            keep_grids: bool = True) -> list[DatasetRecord]:
    """Roll expert episodes for one behavior and label every tick.

    Each tick gives three records: the tracked pose and the pose rotated by
    plus and minus the jitter angle, each labelled with the action that
    tracks the trajectory from that heading.
    """
    try:
        code = BehaviorCode(behavior)
    except ValueError:
        raise UnsupportedBehavior(f"{behavior!r} has no expert demonstrations; use a navigational code") from None
    cfg = config or ExpertConfig()
    wcfg = world_config or WorldConfig()
    lib = library or DescriptorLibrary()
    grid = inflate_cspace(plan, cfg.inflation)
    records: list[DatasetRecord] = []
    jit = math.radians(cfg.jitter_deg)
    for ep in range(int(n_paths)):
        rng = np.random.default_rng(np.random.SeedSequence([rng_seed, plan.seed, ep, 0xE4]))
        epi = episode_endpoints(graph, plan, code, rng)
        start, goal = epi.start, epi.goal
        try:
            traj = expert_trajectory(grid, start, goal, cfg, seed=int(rng.integers(2**31)), dt=wcfg.dt, via=epi.via)
        except NoPath as e:
            raise NoPath(f"episode {ep}: {e}") from e
        world = World(plan, lib, wcfg, Pose(start[0], start[1], float(traj.theta[0])),
                      seed=int(rng.integers(2**31)))
        pp = PurePursuit(traj, cfg.lookahead, cfg.speed, cfg.k_heading)
        sub = _subgoal_letter(code)
        for tick in range(cfg.max_ticks):
            pose = world.pose
            if math.hypot(pose.x - goal[0], pose.y - goal[1]) <= cfg.goal_tol:
                break
            k = pp.target(pose)
            for tag, off in ((0, 0.0), (int(cfg.jitter_deg), jit), (-int(cfg.jitter_deg), -jit)):
                jp = Pose(pose.x, pose.y, wrap_angle(pose.theta + off))
                world.pose = jp
                obs = world.observe()
                a = pp.action_to(jp, k)
                records.append(DatasetRecord(
                    behavior=code.value, subgoal=sub, episode=ep, tick=tick, jitter=tag,
                    pose=(jp.x, jp.y, jp.theta), target=tuple(map(float, traj.xy[k])),
                    action=(a.vx, a.vy, a.omega), rays=obs.rays.astype(np.float32),
                    grid=obs.descriptor_grid.astype(np.float32) if keep_grids else None))
            world.pose = pose
            world.step(pp.action_to(pose, k))
    return records


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def write_dataset(records: list[DatasetRecord], path: str, manifest: dict) -> dict:
    """Write ``path`` (NDJSON, manifest first) and ``path + '.bin'`` (float32 LE grids)."""
    counts: dict[str, int] = {}
    for r in records:
        counts[r.behavior] = counts.get(r.behavior, 0) + 1
    head = {"manifest": {**manifest, "counts": counts, "records": len(records),
                         "sidecar": path.split("/")[-1] + ".bin", "dtype": "<f4"}}
    head["manifest"]["config_hash"] = config_hash(manifest)
    offset = 0
    with open(path, "w") as fh, open(path + ".bin", "wb") as bh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for r in records:
            rec = r.to_json()
            if r.grid is not None:
                block = np.ascontiguousarray(r.grid, dtype="<f4")
                bh.write(block.tobytes())
                rec["grid_offset"] = offset
                rec["grid_shape"] = list(block.shape)
                offset += block.nbytes
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return head["manifest"]


def read_dataset(path: str) -> tuple[dict, list[dict]]:
    """Return (manifest, records); grids are loaded from the sidecar as arrays."""
    with open(path) as fh:
        lines = [json.loads(l) for l in fh if l.strip()]
    manifest = lines[0]["manifest"]
    blob = np.fromfile(path + ".bin", dtype="<f4")
    out = []
    for rec in lines[1:]:
        if rec.get("grid_offset", -1) >= 0:
            shape = tuple(rec["grid_shape"])
            start = rec["grid_offset"] // 4
            rec["grid"] = blob[start:start + int(np.prod(shape))].reshape(shape)
        out.append(rec)
    return manifest, out
