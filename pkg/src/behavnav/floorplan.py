"""Procedural office floor plans.

Maps are built from a small lattice: corridor segments join lattice nodes,
nodes are either plain junctions (corridor width square) or halls, and
offices hang off either side of a corridor behind a single doorway.  The
grid is indexed ``kinds[y, x]`` with ``y`` pointing up; cell ``(x, y)``
covers ``[x, x+1) x [y, y+1)`` in world metres when ``cell_size`` is 1.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

import numpy as np
from scipy import ndimage


class Cell(IntEnum):
    WALL = 0
    CORRIDOR = 1
    OFFICE = 2
    HALL = 3
    DOORWAY = 4


class PlaceType(IntEnum):
    OFFICE = 0
    CORRIDOR = 1
    HALL = 2


CELL_CHARS = {Cell.WALL: "#", Cell.CORRIDOR: ".", Cell.OFFICE: "O", Cell.HALL: "H", Cell.DOORWAY: "D"}
CHAR_CELLS = {c: k for k, c in CELL_CHARS.items()}

CELL_PLACE = {
    Cell.CORRIDOR: PlaceType.CORRIDOR,
    Cell.OFFICE: PlaceType.OFFICE,
    Cell.DOORWAY: PlaceType.CORRIDOR,  # a doorway counts as corridor until the robot is inside
    Cell.HALL: PlaceType.HALL,
}


class GenerationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class Room:
    id: str
    kind: str  # office | corridor | hall | junction
    x0: int
    y0: int
    x1: int
    y1: int
    doors: tuple[tuple[int, int], ...] = ()
    links: tuple[str, ...] = ()  # corridor: (low-end node, high-end node)

    @property
    def axis(self) -> int:
        """0 for corridors running along x, 1 along y."""
        return 0 if (self.x1 - self.x0) >= (self.y1 - self.y0) else 1

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True)
class Landmark:
    id: int
    x: float
    y: float
    nx: int
    ny: int
    place: str


@dataclass
class FloorPlan:
    kinds: np.ndarray
    rooms: dict[str, Room]
    landmarks: list[Landmark]
    seed: int = 0
    cell_size: float = 1.0

    @property
    def height(self) -> int:
        return self.kinds.shape[0]

    @property
    def width(self) -> int:
        return self.kinds.shape[1]

    @cached_property
    def walls(self) -> np.ndarray:
        return np.ascontiguousarray(self.kinds == Cell.WALL)

    @cached_property
    def room_index(self) -> np.ndarray:
        """Per-cell index into ``room_ids`` (-1 for walls)."""
        idx = np.full(self.kinds.shape, -1, dtype=np.int32)
        for i, room in enumerate(self.rooms.values()):
            idx[room.y0:room.y1, room.x0:room.x1] = i
            for dx, dy in room.doors:
                idx[dy, dx] = i
        idx[self.kinds == Cell.WALL] = -1
        return idx

    @cached_property
    def room_ids(self) -> list[str]:
        return list(self.rooms)

    def offices(self) -> list[Room]:
        return [r for r in self.rooms.values() if r.kind == "office"]

    def corridors(self) -> list[Room]:
        return [r for r in self.rooms.values() if r.kind == "corridor"]

    def halls(self) -> list[Room]:
        return [r for r in self.rooms.values() if r.kind == "hall"]

    def cell_at(self, x: float, y: float) -> Cell:
        cx, cy = int(np.floor(x / self.cell_size)), int(np.floor(y / self.cell_size))
        if not (0 <= cx < self.width and 0 <= cy < self.height):
            return Cell.WALL
        return Cell(int(self.kinds[cy, cx]))

    def room_at(self, x: float, y: float) -> str | None:
        cx, cy = int(np.floor(x / self.cell_size)), int(np.floor(y / self.cell_size))
        if not (0 <= cx < self.width and 0 <= cy < self.height):
            return None
        i = self.room_index[cy, cx]
        return None if i < 0 else self.room_ids[i]

    def place_type_at(self, x: float, y: float) -> PlaceType | None:
        return CELL_PLACE.get(self.cell_at(x, y))

    def landmark_by_place(self) -> dict[str, Landmark]:
        return {lm.place: lm for lm in self.landmarks}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FloorPlan):
            return NotImplemented
        return (
            np.array_equal(self.kinds, other.kinds)
            and self.rooms == other.rooms
            and list(self.rooms) == list(other.rooms)
            and self.landmarks == other.landmarks
            and self.seed == other.seed
            and self.cell_size == other.cell_size
        )


# --------------------------------------------------------------------------
# layout description and rasterisation


@dataclass
class GenConfig:
    n_corridors: int = 8
    offices_per_corridor: int = 2
    n_halls: int = 3
    corridor_width_cells: int = 2
    spacing: int = 20
    hall_size: int = 6
    office_width: tuple[int, int] = (4, 5)
    office_depth: tuple[int, int] = (3, 4)
    door_margin: int = 3
    door_separation: int = 6
    library_size: int = 80
    max_retries: int = 64
    cell_size: float = 1.0

    def check(self) -> None:
        if min(self.n_corridors, self.offices_per_corridor) < 1 or self.n_halls < 0:
            raise ValueError("n_corridors and offices_per_corridor must be >= 1, n_halls >= 0")
        if self.corridor_width_cells < 2:
            raise ValueError("corridor_width_cells must be >= 2")


@dataclass(frozen=True)
class OfficeSpec:
    corridor: int  # index into Layout.corridors
    side: int  # +1: higher perpendicular coordinate, -1: lower
    door: int  # door position, cells from the corridor's low end
    width: int
    depth: int
    door_offset: int  # door position inside the office's along-corridor span


@dataclass
class Layout:
    nodes: dict[tuple[int, int], str]
    corridors: list[tuple[tuple[int, int], tuple[int, int]]]
    offices: list[OfficeSpec] = field(default_factory=list)


def _node_rect(node, kind, cfg, origin):
    size = cfg.hall_size if kind == "hall" else cfg.corridor_width_cells
    cx = origin[0] + node[0] * cfg.spacing
    cy = origin[1] + node[1] * cfg.spacing
    h = size // 2
    return cx - h, cy - h, cx - h + size, cy - h + size


def _corridor_rect(a, b, layout, cfg, origin):
    ra = _node_rect(a, layout.nodes[a], cfg, origin)
    rb = _node_rect(b, layout.nodes[b], cfg, origin)
    w = cfg.corridor_width_cells
    if a[1] == b[1]:
        cy = origin[1] + a[1] * cfg.spacing
        return ra[2], cy - w // 2, rb[0], cy - w // 2 + w
    cx = origin[0] + a[0] * cfg.spacing
    return cx - w // 2, ra[3], cx - w // 2 + w, rb[1]


def _office_geometry(spec: OfficeSpec, crect):
    """Return (interior rect, door cell) for an office attached to a corridor."""
    x0, y0, x1, y1 = crect
    horizontal = (x1 - x0) >= (y1 - y0)
    lo = spec.door - spec.door_offset
    if horizontal:
        xa, xb = x0 + lo, x0 + lo + spec.width
        if spec.side > 0:
            return (xa, y1 + 1, xb, y1 + 1 + spec.depth), (x0 + spec.door, y1)
        return (xa, y0 - 1 - spec.depth, xb, y0 - 1), (x0 + spec.door, y0 - 1)
    ya, yb = y0 + lo, y0 + lo + spec.width
    if spec.side > 0:
        return (x1 + 1, ya, x1 + 1 + spec.depth, yb), (x1, y0 + spec.door)
    return (x0 - 1 - spec.depth, ya, x0 - 1, yb), (x0 - 1, y0 + spec.door)


def _layout_extent(layout: Layout, cfg: GenConfig):
    xs = [n[0] for n in layout.nodes]
    ys = [n[1] for n in layout.nodes]
    margin = cfg.hall_size // 2 + cfg.office_depth[1] + 4
    origin = (margin - min(xs) * cfg.spacing, margin - min(ys) * cfg.spacing)
    width = 2 * margin + (max(xs) - min(xs)) * cfg.spacing
    height = 2 * margin + (max(ys) - min(ys)) * cfg.spacing
    return origin, width, height


def rasterize(layout: Layout, cfg: GenConfig, seed: int = 0, landmark_ids=None) -> FloorPlan:
    """Carve a layout into a cell grid and place landmarks."""
    origin, width, height = _layout_extent(layout, cfg)
    kinds = np.full((height, width), Cell.WALL, dtype=np.uint8)
    rooms: dict[str, Room] = {}

    node_ids = {}
    n_h = n_j = 0
    for node in sorted(layout.nodes, key=lambda n: (n[1], n[0])):
        kind = layout.nodes[node]
        if kind == "hall":
            n_h += 1
            node_ids[node] = f"H{n_h}"
        else:
            n_j += 1
            node_ids[node] = f"J{n_j}"

    crects = []
    for j, (a, b) in enumerate(layout.corridors):
        a, b = sorted((a, b))
        rect = _corridor_rect(a, b, layout, cfg, origin)
        crects.append(rect)
        rooms[f"C{j + 1}"] = Room(f"C{j + 1}", "corridor", *rect, links=(node_ids[a], node_ids[b]))
        kinds[rect[1]:rect[3], rect[0]:rect[2]] = Cell.CORRIDOR
    for node, nid in sorted(node_ids.items(), key=lambda kv: kv[1]):
        rect = _node_rect(node, layout.nodes[node], cfg, origin)
        kind = layout.nodes[node]
        rooms[nid] = Room(nid, kind, *rect)
        kinds[rect[1]:rect[3], rect[0]:rect[2]] = Cell.HALL if kind == "hall" else Cell.CORRIDOR
    for k, spec in enumerate(layout.offices):
        rect, door = _office_geometry(spec, crects[spec.corridor])
        oid = f"O{k + 1}"
        rooms[oid] = Room(oid, "office", *rect, doors=(door,), links=(f"C{spec.corridor + 1}",))
        kinds[rect[1]:rect[3], rect[0]:rect[2]] = Cell.OFFICE
        kinds[door[1], door[0]] = Cell.DOORWAY

    rooms = _ordered_rooms(rooms)
    landmarks = _place_landmarks(rooms, layout, crects, landmark_ids)
    return FloorPlan(kinds=kinds, rooms=rooms, landmarks=landmarks, seed=seed, cell_size=cfg.cell_size)


def _ordered_rooms(rooms):
    order = {"office": 0, "corridor": 1, "hall": 2, "junction": 3}

    def key(r):
        return order[r.kind], int(r.id.lstrip("OCHJ"))

    return {r.id: r for r in sorted(rooms.values(), key=key)}


def _door_side_and_along(room: Room, corridor: Room):
    """(+1/-1 side of the corridor, along-corridor door cell) for an office."""
    dx, dy = room.doors[0]
    if corridor.axis == 0:
        return (1 if dy >= corridor.y1 else -1), dx
    return (1 if dx >= corridor.x1 else -1), dy


def _place_landmarks(rooms, layout, crects, landmark_ids):
    anchors: list[tuple[float, float, int, int, str]] = []
    offices = [r for r in rooms.values() if r.kind == "office"]
    door_cols: dict[str, dict[int, list[int]]] = {}
    for o in offices:
        c = rooms[o.links[0]]
        side, along = _door_side_and_along(o, c)
        door_cols.setdefault(c.id, {}).setdefault(along, []).append(side)

    for o in offices:
        c = rooms[o.links[0]]
        side, along = _door_side_and_along(o, c)
        # office landmark: far interior wall, on the door axis, facing the door
        if c.axis == 0:
            fy = o.y1 if side > 0 else o.y0
            anchors.append((along + 0.5, float(fy), 0, -side, o.id))
        else:
            fx = o.x1 if side > 0 else o.x0
            anchors.append((float(fx), along + 0.5, -side, 0, o.id))
    for o in offices:
        c = rooms[o.links[0]]
        side, along = _door_side_and_along(o, c)
        # entrance landmark: opposite corridor wall, facing the door
        shift = 1.0 if len(door_cols[c.id][along]) > 1 else 0.0
        if c.axis == 0:
            fy = c.y0 if side > 0 else c.y1
            anchors.append((along + 0.5 + shift, float(fy), 0, side, "E" + o.id))
        else:
            fx = c.x0 if side > 0 else c.x1
            anchors.append((float(fx), along + 0.5 + shift, side, 0, "E" + o.id))
    for h in (r for r in rooms.values() if r.kind == "hall"):
        anchors.append((h.x0 + 1.0, float(h.y1), 0, -1, h.id))
    for c in (r for r in rooms.values() if r.kind == "corridor"):
        if c.axis == 0:
            anchors.append((c.x0 + 1.5, float(c.y1), 0, -1, c.id + "r"))
            anchors.append((c.x1 - 1.5, float(c.y0), 0, 1, c.id + "l"))
        else:
            anchors.append((float(c.x0), c.y0 + 1.5, 1, 0, c.id + "r"))
            anchors.append((float(c.x1), c.y1 - 1.5, -1, 0, c.id + "l"))
    if landmark_ids is None:
        landmark_ids = range(len(anchors))
    landmark_ids = list(landmark_ids)
    if len(landmark_ids) < len(anchors):
        raise GenerationFailed(f"{len(anchors)} landmarks needed, library provides {len(landmark_ids)}")
    return [Landmark(int(i), x, y, nx, ny, place) for i, (x, y, nx, ny, place) in zip(landmark_ids, anchors)]


# --------------------------------------------------------------------------
# random generation


def _grow_tree(n_edges: int, rng: np.random.Generator):
    side = int(np.ceil(np.sqrt(n_edges + 1))) + 1
    start = (int(rng.integers(side)), int(rng.integers(side)))
    tree = {start}
    edges = []
    while len(edges) < n_edges:
        frontier = []
        for (x, y) in sorted(tree):
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nb = (x + dx, y + dy)
                if 0 <= nb[0] < side and 0 <= nb[1] < side and nb not in tree:
                    frontier.append(((x, y), nb))
        a, b = frontier[int(rng.integers(len(frontier)))]
        tree.add(b)
        edges.append((a, b))
    return tree, edges


def _try_layout(cfg: GenConfig, rng: np.random.Generator) -> Layout | None:
    tree, edges = _grow_tree(cfg.n_corridors, rng)
    degree = {n: 0 for n in tree}
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    eligible = sorted(n for n in tree if degree[n] >= 2)
    if len(eligible) < cfg.n_halls:
        return None
    halls = set()
    if cfg.n_halls:
        picks = rng.choice(len(eligible), size=cfg.n_halls, replace=False)
        halls = {eligible[i] for i in picks}
    layout = Layout(nodes={n: ("hall" if n in halls else "junction") for n in tree},
                    corridors=[tuple(sorted(e)) for e in edges])

    origin, width, height = _layout_extent(layout, cfg)
    carved = np.zeros((height, width), dtype=bool)
    for node, kind in layout.nodes.items():
        x0, y0, x1, y1 = _node_rect(node, kind, cfg, origin)
        carved[y0:y1, x0:x1] = True
    crects = []
    for a, b in layout.corridors:
        x0, y0, x1, y1 = _corridor_rect(a, b, layout, cfg, origin)
        crects.append((x0, y0, x1, y1))
        carved[y0:y1, x0:x1] = True

    for j, crect in enumerate(crects):
        length = max(crect[2] - crect[0], crect[3] - crect[1])
        lo, hi = cfg.door_margin, length - 1 - cfg.door_margin
        placed: list[OfficeSpec] = []
        attempts = 0
        while len(placed) < cfg.offices_per_corridor and attempts < 200:
            attempts += 1
            if hi < lo:
                break
            door = int(rng.integers(lo, hi + 1))
            if any(abs(door - p.door) < cfg.door_separation for p in placed):
                continue
            w = int(rng.integers(cfg.office_width[0], cfg.office_width[1] + 1))
            d = int(rng.integers(cfg.office_depth[0], cfg.office_depth[1] + 1))
            spec = OfficeSpec(j, int(rng.choice([-1, 1])), door, w, d, (w - 1) // 2)
            (ox0, oy0, ox1, oy1), (dx, dy) = _office_geometry(spec, crect)
            if ox0 < 1 or oy0 < 1 or ox1 > width - 1 or oy1 > height - 1:
                continue
            if carved[oy0 - 1:oy1 + 1, ox0 - 1:ox1 + 1].any():
                continue
            carved[oy0:oy1, ox0:ox1] = True
            placed.append(spec)
        if len(placed) < cfg.offices_per_corridor:
            return None
        layout.offices.extend(sorted(placed, key=lambda s: s.door))
    return layout


def generate_floorplan(seed: int, config: GenConfig | None = None) -> FloorPlan:
    """Generate a valid floor plan; a pure function of ``(seed, config)``."""
    cfg = config or GenConfig()
    cfg.check()
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), 0x0F1CE]))
    for _ in range(cfg.max_retries):
        layout = _try_layout(cfg, rng)
        if layout is None:
            continue
        n_needed = 2 * len(layout.offices) + sum(k == "hall" for k in layout.nodes.values()) + 2 * len(layout.corridors)
        if n_needed > cfg.library_size:
            raise GenerationFailed(f"config needs {n_needed} landmarks > library size {cfg.library_size}")
        ids = rng.permutation(cfg.library_size)[:n_needed]
        plan = rasterize(layout, cfg, seed=seed, landmark_ids=ids)
        if not validate_floorplan(plan, library_size=cfg.library_size):
            return plan
    raise GenerationFailed(f"no valid plan for seed={seed} after {cfg.max_retries} retries")



def reference_floorplan(seed: int = 0, library_size: int = 80) -> FloorPlan:
    """Small hand-laid building used by examples and tests.

    C1 runs east from a dead end into hall H1; C2 leaves H1 northwards to a
    junction where C4 heads east; C3 leaves H1 eastwards.  O1 and O3 face each
    other across C1, as do O14 and O16 across C4.  O8 opens onto the east side
    of C2.
    """
    cfg = GenConfig(spacing=20, office_width=(4, 4), office_depth=(3, 3), library_size=library_size)
    nodes = {(0, 0): "junction", (1, 0): "hall", (1, 1): "junction", (2, 0): "junction", (2, 1): "junction"}
    corridors = [((0, 0), (1, 0)), ((1, 0), (1, 1)), ((1, 0), (2, 0)), ((1, 1), (2, 1))]
    # (corridor, side, door, door_offset)
    doors = [
        (0, -1, 4, 1), (0, -1, 11, 1), (0, 1, 4, 1), (0, 1, 12, 2),
        (1, -1, 4, 1), (1, -1, 11, 1), (1, 1, 4, 1), (1, 1, 9, 1),
        (2, -1, 4, 1), (2, -1, 11, 1), (2, 1, 6, 1), (2, 1, 12, 2),
        (3, 1, 4, 1), (3, 1, 11, 1), (3, -1, 6, 2), (3, -1, 11, 1),
    ]
    offices = [OfficeSpec(c, s, d, 4, 3, off) for c, s, d, off in doors]
    layout = Layout(nodes=nodes, corridors=corridors, offices=offices)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF16]))
    n_needed = 2 * len(offices) + 1 + 2 * len(corridors)
    ids = rng.permutation(library_size)[:n_needed]
    return rasterize(layout, cfg, seed=seed, landmark_ids=ids)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str

    def __str__(self) -> str:
        return f"{self.kind}({self.subject})"


def _expected_landmark_places(plan: FloorPlan) -> list[str]:
    places = []
    for r in plan.rooms.values():
        if r.kind == "office":
            places += [r.id, "E" + r.id]
        elif r.kind == "hall":
            places.append(r.id)
        elif r.kind == "corridor":
            places += [r.id + "r", r.id + "l"]
    return places


def validate_floorplan(plan: FloorPlan, library_size: int = 80) -> list[Violation]:
    out: list[Violation] = []
    kinds = plan.kinds
    free = kinds != Cell.WALL
    doorless = set()
    for room in plan.offices():
        ok = False
        for dx, dy in room.doors:
            if not (0 <= dx < plan.width and 0 <= dy < plan.height) or kinds[dy, dx] != Cell.DOORWAY:
                continue
            nbrs = [kinds[dy + ey, dx + ex] for ex, ey in ((1, 0), (-1, 0), (0, 1), (0, -1))
                    if 0 <= dy + ey < plan.height and 0 <= dx + ex < plan.width]
            if Cell.CORRIDOR in nbrs and Cell.OFFICE in nbrs:
                ok = True
        if not ok:
            out.append(Violation("NoDoor", room.id))
            doorless.add(room.id)

    reach = free.copy()
    for rid in doorless:
        r = plan.rooms[rid]
        reach[r.y0:r.y1, r.x0:r.x1] = False
    _, n_comp = ndimage.label(reach)
    if n_comp > 1:
        labels, _ = ndimage.label(reach)
        ys, xs = np.nonzero(labels > 1)
        out.append(Violation("Disconnected", f"cell ({xs[0]},{ys[0]})"))

    seen: set[int] = set()
    for lm in plan.landmarks:
        if lm.id in seen:
            out.append(Violation("DuplicateLandmark", str(lm.id)))
        seen.add(lm.id)
        behind = plan.cell_at(lm.x - 0.5 * lm.nx + 0.25 * lm.ny, lm.y - 0.5 * lm.ny + 0.25 * lm.nx)
        front = plan.cell_at(lm.x + 0.5 * lm.nx + 0.25 * lm.ny, lm.y + 0.5 * lm.ny + 0.25 * lm.nx)
        if behind != Cell.WALL or front == Cell.WALL:
            out.append(Violation("LandmarkOffWall", str(lm.id)))
    if len(plan.landmarks) > library_size:
        out.append(Violation("TooManyLandmarks", str(len(plan.landmarks))))
    owned = {}
    for lm in plan.landmarks:
        owned[lm.place] = owned.get(lm.place, 0) + 1
    for place in _expected_landmark_places(plan):
        if owned.get(place, 0) != 1:
            out.append(Violation("LandmarkCoverage", place))
    return out


# --------------------------------------------------------------------------
# configuration space


@dataclass
class OccupancyGrid:
    resolution: float  # cells per metre
    occupancy: np.ndarray  # [row=y, col=x] bool
    inflation_radius: float

    def index(self, x: float, y: float) -> tuple[int, int]:
        return int(np.floor(y * self.resolution)), int(np.floor(x * self.resolution))

    def is_free(self, x: float, y: float) -> bool:
        i, j = self.index(x, y)
        if not (0 <= i < self.occupancy.shape[0] and 0 <= j < self.occupancy.shape[1]):
            return False
        return not self.occupancy[i, j]

    def segment_free(self, p, q, step: float | None = None) -> bool:
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        step = step or 0.5 / self.resolution
        n = max(2, int(np.ceil(np.linalg.norm(q - p) / step)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        pts = p + t * (q - p)
        ii = np.floor(pts[:, 1] * self.resolution).astype(int)
        jj = np.floor(pts[:, 0] * self.resolution).astype(int)
        h, w = self.occupancy.shape
        if (ii < 0).any() or (jj < 0).any() or (ii >= h).any() or (jj >= w).any():
            return False
        return not self.occupancy[ii, jj].any()


def inflate_cspace(plan: FloorPlan, radius: float, resolution: float = 10.0) -> OccupancyGrid:
    """Occupied wherever the sample point lies within ``radius`` of a wall cell."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    cs = plan.cell_size
    rows = int(round(plan.height * cs * resolution))
    cols = int(round(plan.width * cs * resolution))
    ys = (np.arange(rows) + 0.5) / resolution
    xs = (np.arange(cols) + 0.5) / resolution
    X, Y = np.meshgrid(xs, ys)
    cx = np.floor(X / cs).astype(int)
    cy = np.floor(Y / cs).astype(int)
    reach = int(np.ceil(radius / cs)) + 1
    walls = np.pad(plan.walls, reach, constant_values=True)
    occ = np.zeros((rows, cols), dtype=bool)
    for oy in range(-reach, reach + 1):
        for ox in range(-reach, reach + 1):
            wx, wy = cx + ox, cy + oy
            is_wall = walls[wy + reach, wx + reach]
            dx = np.maximum(np.maximum(wx * cs - X, X - (wx + 1) * cs), 0.0)
            dy = np.maximum(np.maximum(wy * cs - Y, Y - (wy + 1) * cs), 0.0)
            occ |= is_wall & (dx * dx + dy * dy <= radius * radius)
    return OccupancyGrid(resolution=resolution, occupancy=occ, inflation_radius=radius)


# --------------------------------------------------------------------------
# map files: ASCII grid + key=value sidecar


def to_ascii(plan: FloorPlan) -> str:
    lut = np.array([CELL_CHARS[Cell(i)] for i in range(len(Cell))])
    rows = ["".join(lut[row]) for row in plan.kinds[::-1]]
    return "\n".join(rows) + "\n"


def to_sidecar(plan: FloorPlan) -> str:
    lines = [f"seed={plan.seed}", f"cell_size={plan.cell_size!r}", f"width={plan.width}", f"height={plan.height}"]
    for r in plan.rooms.values():
        s = f"room={r.id} {r.kind} {r.x0} {r.y0} {r.x1} {r.y1}"
        if r.doors:
            s += " doors=" + ";".join(f"{x}:{y}" for x, y in r.doors)
        if r.links:
            s += " links=" + ",".join(r.links)
        lines.append(s)
    for lm in plan.landmarks:
        lines.append(f"landmark={lm.id} {lm.x!r} {lm.y!r} {lm.nx} {lm.ny} {lm.place}")
    return "\n".join(lines) + "\n"


def parse_map(ascii_text: str, sidecar_text: str) -> FloorPlan:
    rows = [ln for ln in ascii_text.splitlines() if ln]
    try:
        kinds = np.array([[CHAR_CELLS[c] for c in row] for row in rows], dtype=np.uint8)[::-1].copy()
    except KeyError as e:
        raise ValueError(f"unknown map character {e}") from None
    meta: dict[str, str] = {}
    rooms: dict[str, Room] = {}
    landmarks: list[Landmark] = []
    for line in sidecar_text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key == "room":
            parts = value.split()
            rid, kind = parts[0], parts[1]
            x0, y0, x1, y1 = map(int, parts[2:6])
            doors, links = (), ()
            for extra in parts[6:]:
                k, _, v = extra.partition("=")
                if k == "doors":
                    doors = tuple(tuple(int(t) for t in d.split(":")) for d in v.split(";"))
                elif k == "links":
                    links = tuple(v.split(","))
            rooms[rid] = Room(rid, kind, x0, y0, x1, y1, doors, links)
        elif key == "landmark":
            i, x, y, nx, ny, place = value.split()
            landmarks.append(Landmark(int(i), float(x), float(y), int(nx), int(ny), place))
        else:
            meta[key] = value
    if kinds.shape != (int(meta["height"]), int(meta["width"])):
        raise ValueError("sidecar dimensions disagree with the grid")
    return FloorPlan(kinds=kinds, rooms=rooms, landmarks=landmarks,
                     seed=int(meta["seed"]), cell_size=float(meta["cell_size"]))


def save_map(plan: FloorPlan, path) -> None:
    from pathlib import Path

    path = Path(path)
    path.write_text(to_ascii(plan))
    Path(str(path) + ".meta").write_text(to_sidecar(plan))


def load_map(path) -> FloorPlan:
    from pathlib import Path

    path = Path(path)
    return parse_map(path.read_text(), Path(str(path) + ".meta").read_text())


def replace_cells(plan: FloorPlan, cells, kind: Cell) -> FloorPlan:
    """Copy of ``plan`` with the given cells overwritten (test/debug helper)."""
    kinds = plan.kinds.copy()
    for x, y in cells:
        kinds[y, x] = kind
    return dataclasses.replace(plan, kinds=kinds)
