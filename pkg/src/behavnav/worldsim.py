"""2D kinematic robot simulation over a FloorPlan.

The robot is a holonomic disk.  Each tick it senses a fan of depth rays and
a coarse camera grid of region descriptors; landmarks that project onto a
region replace that region's background descriptor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .floorplan import CELL_PLACE, Cell, FloorPlan, PlaceType
from .raycast import cast_fan, cast_ray, disk_clearance, move_disk


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0


@dataclass(frozen=True)
class Action:
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def clamped(self, v_max: float, w_max: float) -> "Action":
        return Action(
            float(np.clip(self.vx, -v_max, v_max)),
            float(np.clip(self.vy, -v_max, v_max)),
            float(np.clip(self.omega, -w_max, w_max)),
        )


@dataclass
class WorldConfig:
    dt: float = 0.1
    v_max: float = 1.0
    w_max: float = math.pi / 2
    radius: float = 0.15
    n_rays: int = 61
    fov: float = math.pi
    range_max: float = 10.0
    grid_size: int = 7
    camera_fov: float = math.radians(60.0)
    camera_vfov: float = math.radians(45.0)
    landmark_width: float = 0.6
    landmark_height: float = 1.0
    min_coverage: float = 0.5
    sigma: float = 0.05
    eps_pd: float = 0.0

    @property
    def ray_angles(self) -> np.ndarray:
        return np.linspace(-self.fov / 2, self.fov / 2, self.n_rays)


class DescriptorLibrary:
    """Ground-truth landmark descriptors plus a low-rank background model.

    Background regions are drawn mostly from a fixed ``background_dim``
    subspace so that a trained embedding can learn to ignore them.
    """

    def __init__(self, size: int = 80, dim: int = 64, seed: int = 0,
                 background_dim: int = 8, background_iso: float = 0.05):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDE5C]))
        v = rng.standard_normal((size, dim))
        self.vectors = v / np.linalg.norm(v, axis=1, keepdims=True)
        q, _ = np.linalg.qr(rng.standard_normal((dim, background_dim)))
        self.background = q
        self.background_iso = background_iso
        self.seed = seed

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def distractors(self, rng: np.random.Generator, count: int) -> np.ndarray:
        z = rng.standard_normal((count, self.background.shape[1])) @ self.background.T
        z += self.background_iso * rng.standard_normal((count, self.dim))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    def noisy(self, landmark_id: int, rng: np.random.Generator, sigma: float, count: int = 1) -> np.ndarray:
        v = np.repeat(self.vectors[landmark_id][None], count, axis=0)
        if sigma > 0:
            v = v + sigma * rng.standard_normal(v.shape)
        return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class Observation:
    rays: np.ndarray
    descriptor_grid: np.ndarray  # (R, R, D)
    place_hint: PlaceType
    ray_angles: np.ndarray
    visible_landmarks: tuple[int, ...] = ()
    landmark_cells: dict = field(default_factory=dict)


class World:
    def __init__(self, plan: FloorPlan, library: DescriptorLibrary, config: WorldConfig | None = None,
                 pose: Pose | None = None, seed: int = 0):
        self.plan = plan
        self.library = library
        self.config = config or WorldConfig()
        self.seed = seed
        self.tick = 0
        self._walls = plan.walls
        self._angles = self.config.ray_angles
        lms = plan.landmarks
        self._lm_ids = np.array([lm.id for lm in lms], dtype=np.int64)
        self._lm_pos = np.array([(lm.x, lm.y) for lm in lms], dtype=float).reshape(-1, 2)
        self._lm_nrm = np.array([(lm.nx, lm.ny) for lm in lms], dtype=float).reshape(-1, 2)
        self.pose = pose or Pose(*plan.rooms[next(iter(plan.rooms))].center, 0.0)

    # -- kinematics ---------------------------------------------------------

    def clearance(self, x: float | None = None, y: float | None = None) -> float:
        x = self.pose.x if x is None else x
        y = self.pose.y if y is None else y
        return disk_clearance(self._walls, float(x), float(y), self.config.radius, self.plan.cell_size)

    def pose_valid(self, pose: Pose) -> bool:
        return self.clearance(pose.x, pose.y) >= self.config.radius

    def step(self, action: Action, dt: float | None = None) -> "World":
        cfg = self.config
        dt = cfg.dt if dt is None else dt
        if dt <= 0:
            raise ValueError("dt must be positive")
        a = action.clamped(cfg.v_max, cfg.w_max)
        th = self.pose.theta
        c, s = math.cos(th), math.sin(th)
        dx = (a.vx * c - a.vy * s) * dt
        dy = (a.vx * s + a.vy * c) * dt
        x, y = self.pose.x, self.pose.y
        if dx or dy:
            x, y = move_disk(self._walls, x, y, dx, dy, cfg.radius, self.plan.cell_size)
        self.pose = Pose(float(x), float(y), wrap_angle(th + a.omega * dt))
        self.tick += 1
        return self

    # -- sensing ------------------------------------------------------------

    def rng_for_tick(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed & (2**63 - 1), self.tick, 0x0B5]))

    def cast(self, angles: np.ndarray | None = None) -> np.ndarray:
        ang = self._angles if angles is None else np.asarray(angles, float)
        p = self.pose
        return cast_fan(self._walls, p.x, p.y, p.theta, ang, self.config.range_max, self.plan.cell_size)

    def true_place(self) -> PlaceType | None:
        return self.plan.place_type_at(self.pose.x, self.pose.y)

    def visible_landmarks(self) -> list[tuple[int, float, float, float]]:
        """(landmark id, distance, left bearing, right bearing) for each visible landmark."""
        cfg = self.config
        p = self.pose
        if len(self._lm_ids) == 0:
            return []
        rel = self._lm_pos - (p.x, p.y)
        dist = np.hypot(rel[:, 0], rel[:, 1])
        bearing = np.arctan2(rel[:, 1], rel[:, 0]) - p.theta
        bearing = (bearing + np.pi) % (2 * np.pi) - np.pi
        facing = -(rel * self._lm_nrm).sum(axis=1) > 1e-9
        cand = np.nonzero((dist <= cfg.range_max) & (np.abs(bearing) <= cfg.camera_fov / 2) & facing & (dist > 1e-6))[0]
        out = []
        half = cfg.landmark_width / 2
        for k in cand:
            d = dist[k]
            hit = cast_ray(self._walls, p.x, p.y, p.theta + bearing[k], cfg.range_max, self.plan.cell_size)
            if hit < d - 1e-6:
                continue
            tx, ty = -self._lm_nrm[k, 1], self._lm_nrm[k, 0]
            ends = []
            for sgn in (-1.0, 1.0):
                ex = self._lm_pos[k, 0] + sgn * half * tx - p.x
                ey = self._lm_pos[k, 1] + sgn * half * ty - p.y
                ends.append(wrap_angle(math.atan2(ey, ex) - p.theta))
            out.append((int(self._lm_ids[k]), float(d), max(ends), min(ends)))
        return out

    def observe(self) -> Observation:
        cfg = self.config
        rng = self.rng_for_tick()
        rays = self.cast()
        R = cfg.grid_size
        lib = self.library
        grid = lib.distractors(rng, R * R).reshape(R, R, lib.dim)

        vis = self.visible_landmarks()
        cw = cfg.camera_fov / R
        rh = cfg.camera_vfov / R
        col_hi = cfg.camera_fov / 2 - np.arange(R) * cw  # left edge (larger bearing)
        col_lo = col_hi - cw
        row_hi = cfg.camera_vfov / 2 - np.arange(R) * rh
        row_lo = row_hi - rh
        best = np.zeros((R, R))
        owner = np.full((R, R), -1, dtype=np.int64)
        for lm_id, d, b_left, b_right in vis:
            hov = np.clip(np.minimum(col_hi, b_left) - np.maximum(col_lo, b_right), 0.0, None) / cw
            v = math.atan2(cfg.landmark_height / 2, d)
            vov = np.clip(np.minimum(row_hi, v) - np.maximum(row_lo, -v), 0.0, None) / rh
            cov = vov[:, None] * hov[None, :]
            take = (cov >= cfg.min_coverage) & (cov > best)
            best[take] = cov[take]
            owner[take] = lm_id
        cells = {}
        for lm_id in np.unique(owner[owner >= 0]):
            mask = owner == lm_id
            n = int(mask.sum())
            grid[mask] = lib.noisy(int(lm_id), rng, cfg.sigma, n)
            cells[int(lm_id)] = n

        place = self.true_place()
        if place is None:
            place = PlaceType.CORRIDOR
        if cfg.eps_pd > 0 and rng.random() < cfg.eps_pd:
            others = [p for p in PlaceType if p != place]
            place = others[int(rng.integers(len(others)))]
        return Observation(
            rays=rays,
            descriptor_grid=grid,
            place_hint=place,
            ray_angles=self._angles,
            visible_landmarks=tuple(v[0] for v in vis),
            landmark_cells=cells,
        )


class TraceWriter:
    """Newline-delimited JSON trace, one record per tick."""

    def __init__(self, fh):
        self.fh = fh

    def write(self, tick: int, pose: Pose, action: Action, behavior: str) -> None:
        rec = {"tick": tick, "x": pose.x, "y": pose.y, "theta": pose.theta,
               "vx": action.vx, "vy": action.vy, "omega": action.omega, "behavior": behavior}
        self.fh.write(json.dumps(rec) + "\n")


def read_trace(fh) -> list[dict]:
    return [json.loads(line) for line in fh if line.strip()]


def place_of_cell(kind: Cell) -> PlaceType | None:
    return CELL_PLACE.get(kind)
