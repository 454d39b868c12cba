"""Reactive navigation behaviors as pure functions of (Observation, Subgoal).

All controllers share one perception step over the depth fan:

* the lattice angle ``psi``: walls are axis aligned, so the direction of
  short segments between consecutive hit points, taken modulo 90 degrees,
  gives the rotation from the robot frame to the nearest building axis;
* an *aligned frame* (x forward along that axis, y to the left) in which
  side-wall distances, free space ahead and wall gaps are measured;
* gaps: openings in a straight wall bounded by wall samples on both sides
  and seen through by the rays between them.  Narrow gaps are doors, wide
  ones are corridor mouths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from .floorplan import PlaceType
from .worldsim import Action, Observation, wrap_angle


class BehaviorKind(str, Enum):
    CF = "cf"
    OO = "oo"
    IO = "io"
    CH = "ch"
    CC = "cc"
    PD = "pd"
    LMPD = "lmpd"

    @property
    def navigational(self) -> bool:
        return self not in (BehaviorKind.PD, BehaviorKind.LMPD)


class Subgoal(Enum):
    LEFT = 0
    CENTER = 1
    RIGHT = 2

    @property
    def one_hot(self) -> np.ndarray:
        v = np.zeros(3)
        v[self.value] = 1.0
        return v

    @classmethod
    def from_one_hot(cls, vec) -> "Subgoal":
        v = np.asarray(vec)
        if v.shape != (3,) or np.count_nonzero(v) != 1:
            raise ValueError("subgoal must be a one-hot 3-vector")
        return cls(int(np.argmax(v)))

    @classmethod
    def from_letter(cls, letter: str | None) -> "Subgoal | None":
        return {None: None, "l": cls.LEFT, "r": cls.RIGHT, "c": cls.CENTER}[letter]

    @property
    def sign(self) -> int:
        return {Subgoal.LEFT: 1, Subgoal.CENTER: 0, Subgoal.RIGHT: -1}[self]


@dataclass
class ControllerConfig:
    v_max: float = 1.0
    w_max: float = math.pi / 2
    k_heading: float = 2.5
    k_lateral: float = 1.2
    half_width: float = 1.0
    stop_dist: float = 0.45
    slow_dist: float = 1.5
    gap_beyond: float = 0.4  # a ray sees through a gap if it travels this far past the wall line
    door_max: float = 1.6
    mouth_min: float = 1.2
    mouth_range: float = 6.5
    door_window: tuple[float, float] = (-0.2, 1.2)
    jamb: float = 0.7
    turn_rate: float = 1.2
    mouth_gate: float = 0.3  # start turning into a mouth once its near edge is this close to abreast
    mouth_commit: float = 0.8  # inward speed while turning into a mouth


# ----------------------------------------------------------------------------
# perception kernels


@numba.njit(cache=True)
def _lattice_angle(px, py, hit, max_seg):
    """Circular mean of 4x segment directions; returns angle in (-pi/4, pi/4]."""
    n = px.shape[0]
    phis = np.empty(n)
    m = 0
    for k in range(n - 1):
        if hit[k] and hit[k + 1]:
            sx = px[k + 1] - px[k]
            sy = py[k + 1] - py[k]
            d = math.sqrt(sx * sx + sy * sy)
            if 1e-6 < d < max_seg:
                phis[m] = math.atan2(sy, sx)
                m += 1
    if m == 0:
        return 0.0, 0
    c = 0.0
    s = 0.0
    for k in range(m):
        c += math.cos(4 * phis[k])
        s += math.sin(4 * phis[k])
    psi = math.atan2(s, c) / 4
    # refine on inliers
    c = 0.0
    s = 0.0
    cnt = 0
    for k in range(m):
        dd = 4 * phis[k] - 4 * psi
        dd = (dd + math.pi) % (2 * math.pi) - math.pi
        if abs(dd) < 4 * 0.17:
            c += math.cos(4 * phis[k])
            s += math.sin(4 * phis[k])
            cnt += 1
    if cnt > 0:
        psi = math.atan2(s, c) / 4
    return psi, cnt


@numba.njit(cache=True)
def _scan_gaps(px, py, r, dx, dy, hit, beyond, out):
    """Find wall gaps in the aligned frame.

    Writes rows (horizontal, line coord, start along, end along, inner lo,
    inner hi) into ``out``; returns the row count.
    """
    n = px.shape[0]
    count = 0
    for sweep in range(2):
        step = 1 if sweep == 0 else -1
        for t in range(n):
            i = t if step == 1 else n - 1 - t
            prev = i - step
            nxt = i + step
            if prev < 0 or prev >= n or nxt < 0 or nxt >= n:
                continue
            if not hit[i] or not hit[prev]:
                continue
            sx = px[i] - px[prev]
            sy = py[i] - py[prev]
            seg = math.sqrt(sx * sx + sy * sy)
            if seg > 1.0 or seg < 1e-6:
                continue
            if abs(sy) <= 0.3 * seg:
                horiz = True
                c = py[i]
            elif abs(sx) <= 0.3 * seg:
                horiz = False
                c = px[i]
            else:
                continue
            if abs(c) < 0.2:
                continue
            lo = 1e9
            hi = -1e9
            through = 0
            closed = False
            end_along = 0.0
            k = nxt
            while 0 <= k < n:
                dperp = dy[k] if horiz else dx[k]
                tk = -1.0
                if dperp * c > 1e-9:
                    tk = c / dperp
                if tk > 0 and r[k] > tk + beyond:
                    along = (dx[k] if horiz else dy[k]) * tk
                    if along < lo:
                        lo = along
                    if along > hi:
                        hi = along
                    through += 1
                elif through == 0 and tk > 0 and r[k] > tk:
                    # grazing a door jamb just past the wall line: keep looking
                    pass
                else:
                    if through > 0 and hit[k]:
                        coord = py[k] if horiz else px[k]
                        if abs(coord - c) < 0.5:
                            closed = True
                            end_along = px[k] if horiz else py[k]
                    break
                k += step
            if closed and count < out.shape[0]:
                out[count, 0] = 1.0 if horiz else 0.0
                out[count, 1] = c
                out[count, 2] = px[i] if horiz else py[i]
                out[count, 3] = end_along
                out[count, 4] = lo
                out[count, 5] = hi
                count += 1
    return count


@dataclass(frozen=True)
class Gap:
    horizontal: bool  # wall line y = line (True) or x = line (False), aligned frame
    line: float
    lo: float  # outer extent along the line (bounding wall samples)
    hi: float
    inner_lo: float  # extent of see-through crossings
    inner_hi: float

    @property
    def outer(self) -> float:
        return self.hi - self.lo

    @property
    def inner(self) -> float:
        return self.inner_hi - self.inner_lo

    @property
    def mid(self) -> float:
        return 0.25 * (self.lo + self.hi + self.inner_lo + self.inner_hi)

    @property
    def center(self) -> tuple[float, float]:
        return (self.mid, self.line) if self.horizontal else (self.line, self.mid)

    @property
    def normal(self) -> tuple[float, float]:
        s = 1.0 if self.line > 0 else -1.0
        return (0.0, s) if self.horizontal else (s, 0.0)

    @property
    def bearing(self) -> float:
        cx, cy = self.center
        return math.atan2(cy, cx)

    @property
    def distance(self) -> float:
        cx, cy = self.center
        return math.hypot(cx, cy)

    def point(self, offset: float) -> tuple[float, float]:
        cx, cy = self.center
        nx, ny = self.normal
        return cx + offset * nx, cy + offset * ny

    def clear_line(self, tx: float, ty: float, margin: float) -> bool:
        """Does the segment from the robot to (tx, ty) cross the gap with ``margin`` to spare?"""
        a, b = (ty, tx) if self.horizontal else (tx, ty)
        if a * self.line <= 0 or abs(a) < abs(self.line):
            return False
        along = b * self.line / a
        return self.inner_lo + margin <= along <= self.inner_hi - margin


@dataclass
class Percept:
    psi: float  # angle of the aligned frame in the robot frame
    left: float  # nearest left wall over a short window ahead (inf if open)
    right: float
    abreast_left: float
    abreast_right: float
    front: float
    gaps: tuple[Gap, ...]
    side_depth_left: float  # depth of the deepest abreast ray on each side
    side_depth_right: float

    def doors(self, cfg: ControllerConfig) -> list[Gap]:
        return [g for g in self.gaps if g.outer <= cfg.door_max and g.inner >= 0.25]

    def mouths(self, cfg: ControllerConfig) -> list[Gap]:
        return [g for g in self.gaps if g.inner >= cfg.mouth_min and g.outer <= 3.5
                and g.distance <= cfg.mouth_range]

    @property
    def corridor_width(self) -> float:
        return self.abreast_left + self.abreast_right


def _dedupe(gaps: list[Gap]) -> list[Gap]:
    out: list[Gap] = []
    for g in sorted(gaps, key=lambda g: -g.inner):
        if any(h.horizontal == g.horizontal and abs(h.line - g.line) < 0.3
               and min(h.hi, g.hi) > max(h.lo, g.lo) for h in out):
            continue
        out.append(g)
    return out


def perceive(obs: Observation, range_max: float = 10.0) -> Percept:
    """Geometric summary of the depth fan; memoized on the observation."""
    cached = getattr(obs, "_percept", None)
    if cached is not None and cached[0] == range_max:
        return cached[1]
    p = _perceive(obs, range_max)
    obs._percept = (range_max, p)
    return p


def _perceive(obs: Observation, range_max: float) -> Percept:
    r = np.asarray(obs.rays, dtype=float)
    a = np.asarray(obs.ray_angles, dtype=float)
    hit = r < range_max - 1e-6
    px, py = r * np.cos(a), r * np.sin(a)
    psi, _ = _lattice_angle(px, py, hit, 0.8)
    aa = a - psi
    dx, dy = np.cos(aa), np.sin(aa)
    qx, qy = r * dx, r * dy

    def side(sel):
        return float(np.abs(qy[sel]).min()) if sel.any() else math.inf

    ahead = hit & (qx > -0.3) & (qx < 2.0)
    left = side(ahead & (qy > 0.05) & (qy < 1.8))
    right = side(ahead & (qy < -0.05) & (qy > -1.8))
    near = hit & (np.abs(qx) < 0.3)
    ab_left = side(near & (qy > 0.05) & (qy < 1.8))
    ab_right = side(near & (qy < -0.05) & (qy > -1.8))
    corr = (np.abs(qy) < 0.25) & (qx > 0)
    front = float(qx[corr].min()) if corr.any() else range_max
    abreast_l = (aa > math.radians(75)) & (aa < math.radians(105))
    abreast_r = (aa < -math.radians(75)) & (aa > -math.radians(105))
    depth_l = float(np.sort(r[abreast_l])[-2]) if abreast_l.sum() >= 2 else 0.0
    depth_r = float(np.sort(r[abreast_r])[-2]) if abreast_r.sum() >= 2 else 0.0

    buf = np.zeros((64, 6))
    n = _scan_gaps(qx, qy, r, dx, dy, hit, 0.4, buf)
    gaps = []
    for row in buf[:n]:
        s, e = sorted((row[2], row[3]))
        gaps.append(Gap(bool(row[0]), float(row[1]), float(s), float(e), float(row[4]), float(row[5])))
    return Percept(psi=float(psi), left=left, right=right, abreast_left=ab_left, abreast_right=ab_right,
                   front=front, gaps=tuple(_dedupe(gaps)), side_depth_left=depth_l, side_depth_right=depth_r)


def aligned_in_corridor(p: Percept, tol: float = 0.12) -> bool:
    """Heading along a corridor axis with both corridor walls beside the robot."""
    return (abs(p.psi) < tol and p.abreast_left < 1.5 and p.abreast_right < 1.5
            and 1.5 <= p.corridor_width <= 2.5 and p.front >= 2.0)


def junction_abreast(p: Percept, depth: float = 7.0) -> bool:
    """A long opening directly beside the robot: a corridor branching off."""
    return p.side_depth_left >= depth or p.side_depth_right >= depth


# ----------------------------------------------------------------------------
# controllers


def _to_robot(p: Percept, vx: float, vy: float, omega: float, cfg: ControllerConfig) -> Action:
    c, s = math.cos(p.psi), math.sin(p.psi)
    return Action(vx * c - vy * s, vx * s + vy * c, omega).clamped(cfg.v_max, cfg.w_max)


def _speed(front: float, cfg: ControllerConfig) -> float:
    return cfg.v_max * float(np.clip((front - cfg.stop_dist) / cfg.slow_dist, 0.0, 1.0))


def _corridor_follow(p: Percept, cfg: ControllerConfig) -> Action:
    if math.isfinite(p.left) and math.isfinite(p.right):
        e = (p.left - p.right) / 2
    elif math.isfinite(p.left):
        e = p.left - cfg.half_width
    elif math.isfinite(p.right):
        e = cfg.half_width - p.right
    else:
        e = 0.0
    theta_des = math.atan(cfg.k_lateral * e)
    theta_des = float(np.clip(theta_des, -0.6, 0.6))
    # robot heading in the aligned frame is -psi
    omega = cfg.k_heading * (theta_des + p.psi)
    return Action(_speed(p.front, cfg), 0.0, omega).clamped(cfg.v_max, cfg.w_max)


def _go_through(p: Percept, gap: Gap, cfg: ControllerConfig, tol: float, standoff: float, speed: float,
                turn_gate: float = math.inf, commit: float = 0.0) -> Action:
    """Funnel through ``gap``: face its normal, slide onto its centre, then advance.

    Until the robot is centred within ``tol`` and roughly facing the opening it
    only closes in to ``standoff`` from the wall line, unless ``commit`` asks
    for a minimum inward speed once centred.
    """
    nx, ny = gap.normal
    tx, ty = (1.0, 0.0) if gap.horizontal else (0.0, 1.0)
    e = gap.mid
    heading_err = wrap_angle(math.atan2(ny, nx) + p.psi)
    v_t = float(np.clip(1.5 * e, -0.6, 0.6))
    # optionally hold the current axis until close to abreast of the opening
    near = gap.lo if e > 0 else -gap.hi  # closest edge along the line, ahead if positive
    omega = cfg.k_heading * (heading_err if min(abs(e), near) < turn_gate else p.psi)
    if abs(e) < tol and abs(heading_err) < 0.5:
        v_n = speed
    else:
        v_n = float(np.clip(0.8 * (abs(gap.line) - standoff), 0.0, speed))
        if abs(e) < 2.0 * tol:
            v_n = max(v_n, commit)
    if gap.horizontal:
        # never push sideways into the wall beside the robot
        beside = p.abreast_left if gap.line > 0 else p.abreast_right
        v_n = min(v_n, max(0.0, 1.5 * (beside - 0.4)))
    vx = v_n * nx + v_t * tx
    vy = v_n * ny + v_t * ty
    return _to_robot(p, vx, vy, omega, cfg)


def corridor_follow(obs: Observation, subgoal: Subgoal | None = None, cfg: ControllerConfig | None = None) -> Action:
    cfg = cfg or ControllerConfig()
    return _corridor_follow(perceive(obs), cfg)


def _pick_mouth(mouths: list[Gap], subgoal: Subgoal, late: float = -0.25) -> tuple[Gap | None, bool]:
    """Choose the opening to take; the flag says whether it is a side opening.

    A side opening stays eligible until its centre falls ``late`` metres
    behind.  Once the turn has carried the robot past the frame switch the
    same opening shows up ahead, which finishes the turn.
    """
    if subgoal is not Subgoal.CENTER:
        side = [g for g in mouths if g.horizontal and g.line * subgoal.sign > 0 and g.mid > late]
        if side:
            return min(side, key=lambda g: g.mid), True
        ahead = [g for g in mouths if not g.horizontal and g.line > 0.3 and abs(g.mid) < 1.0]
        if ahead:
            return min(ahead, key=lambda g: abs(g.mid)), False
        return None, False
    ahead = [g for g in mouths if not g.horizontal and g.line > 0.3]
    if ahead:
        return min(ahead, key=lambda g: abs(g.mid)), False
    return None, False


def _take_mouth(p: Percept, subgoal: Subgoal, cfg: ControllerConfig) -> Action:
    g, side = _pick_mouth(p.mouths(cfg), subgoal)
    if g is None:
        return _corridor_follow(p, cfg)
    if side:
        return _go_through(p, g, cfg, 0.35, 0.9, cfg.v_max, turn_gate=cfg.mouth_gate, commit=cfg.mouth_commit)
    return _go_through(p, g, cfg, 0.35, 0.9, cfg.v_max)


def corridor_change(obs: Observation, subgoal: Subgoal, cfg: ControllerConfig | None = None) -> Action:
    cfg = cfg or ControllerConfig()
    p = perceive(obs)
    if subgoal is Subgoal.CENTER:
        return _corridor_follow(p, cfg)
    return _take_mouth(p, subgoal, cfg)


def cross_hall(obs: Observation, subgoal: Subgoal, cfg: ControllerConfig | None = None) -> Action:
    cfg = cfg or ControllerConfig()
    return _take_mouth(perceive(obs), subgoal, cfg)


def _in_doorway(p: Percept, cfg: ControllerConfig) -> bool:
    return p.abreast_left <= cfg.jamb and p.abreast_right <= cfg.jamb


def _straight(p: Percept, cfg: ControllerConfig, speed: float | None = None) -> Action:
    v = _speed(p.front, cfg) if speed is None else speed
    return _to_robot(p, v, 0.0, cfg.k_heading * p.psi, cfg)


def out_of_office(obs: Observation, subgoal: Subgoal, cfg: ControllerConfig | None = None) -> Action:
    cfg = cfg or ControllerConfig()
    p = perceive(obs)
    if _in_doorway(p, cfg):
        return _straight(p, cfg, 0.6)
    if obs.place_hint == PlaceType.OFFICE:
        doors = p.doors(cfg)
        if doors:
            g = min(doors, key=lambda g: g.distance)
            return _go_through(p, g, cfg, 0.12, 0.5, 0.6)
        return _straight(p, cfg)
    if subgoal is Subgoal.CENTER:
        doors = [g for g in p.doors(cfg) if not g.horizontal and g.line > 0 and abs(g.mid) < 0.8]
        if doors:
            return _go_through(p, doors[0], cfg, 0.12, 0.5, 0.6)
        return _straight(p, cfg, 0.6)
    # facing across the corridor (far wall close, or the corridor open on both sides);
    # the psi test stops this once the frame has switched to the new heading
    crossing = p.side_depth_left >= 3.0 and p.side_depth_right >= 3.0
    if (p.front < 1.6 or crossing) and p.psi * subgoal.sign <= 0.1:
        vx = float(np.clip(0.8 * (p.front - cfg.half_width), -0.3, 0.3))
        return _to_robot(p, vx, 0.0, subgoal.sign * cfg.turn_rate, cfg)
    return _corridor_follow(p, cfg)


def into_office(obs: Observation, subgoal: Subgoal, cfg: ControllerConfig | None = None) -> Action:
    cfg = cfg or ControllerConfig()
    p = perceive(obs)
    doors = p.doors(cfg)
    ahead = [g for g in doors if not g.horizontal and 0 < g.line < 3.0 and abs(g.mid) < 1.5]
    if ahead:
        return _go_through(p, min(ahead, key=lambda g: g.line), cfg, 0.12, 0.5, 0.6)
    if _in_doorway(p, cfg):
        return _straight(p, cfg, 0.6)
    if obs.place_hint == PlaceType.OFFICE:
        return _straight(p, cfg, min(0.5, _speed(p.front, cfg)))
    lo, hi = cfg.door_window
    if subgoal is not Subgoal.CENTER:
        side = [g for g in doors if g.horizontal and g.line * subgoal.sign > 0 and abs(g.line) < 1.8
                and lo <= g.mid <= hi]
        if side:
            return _go_through(p, min(side, key=lambda g: g.mid), cfg, 0.12, 0.5, 0.6)
    return _corridor_follow(p, cfg)


def classify_place(obs: Observation) -> PlaceType:
    return obs.place_hint


_CONTROLLERS = {
    BehaviorKind.CF: corridor_follow,
    BehaviorKind.OO: out_of_office,
    BehaviorKind.IO: into_office,
    BehaviorKind.CH: cross_hall,
    BehaviorKind.CC: corridor_change,
}


def run_behavior(kind: BehaviorKind, obs: Observation, subgoal: Subgoal | None = None,
                 cfg: ControllerConfig | None = None) -> Action:
    kind = BehaviorKind(kind)
    if not kind.navigational:
        raise ValueError(f"{kind.value} is a perceptual behavior")
    if (kind is BehaviorKind.CF) != (subgoal is None):
        raise ValueError("cf takes no subgoal; oo, io, ch and cc require one")
    return _CONTROLLERS[kind](obs, subgoal, cfg)


def behavior_for_code(code: str) -> tuple[BehaviorKind, Subgoal | None]:
    """Map a triplet code such as 'chl' or 'cf' to a controller and its subgoal."""
    fam = BehaviorKind(code[:2])
    if fam is BehaviorKind.CF:
        return fam, None
    last = code[-1]
    return fam, Subgoal.from_letter("c" if last in "cs" else last)
