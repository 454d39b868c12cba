"""Semantic place graph: places as nodes, ``place --behavior--> place`` triplets as edges.

Headings are compass indices (0=E, 1=N, 2=W, 3=S).  Corridor direction ``r``
runs towards increasing x (horizontal corridors) or y (vertical ones).

Whether a triplet can follow another depends on how the robot arrived at a
place: a hall's turn code depends on the entry heading, an entrance's
``iol``/``ior`` code on the approach direction, and an entrance is only
reachable by ``cf`` if its door lies ahead of where the robot joined the
corridor.  ``SemanticGraph.successors`` encodes that traversal rule.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .floorplan import FloorPlan

PLACE_RE = re.compile(r"^(?:O[1-9]\d*|EO[1-9]\d*|C[1-9]\d*[lr]|H[1-9]\d*)$")
MIN_AHEAD = 2.0


class ExtractionError(ValueError):
    pass


class NoRoute(LookupError):
    pass


class UnknownPlace(KeyError):
    pass


class BehaviorCode(str, Enum):
    OOL = "ool"
    OOR = "oor"
    OOC = "ooc"
    CF = "cf"
    IOL = "iol"
    IOR = "ior"
    CHS = "chs"
    CHL = "chl"
    CHR = "chr"
    CCC = "ccc"
    CCL = "ccl"
    CCR = "ccr"

    @property
    def family(self) -> str:
        return self.value[:2]

    @property
    def direction(self) -> str | None:
        """'l', 'r', 'c' (straight/centre) or None for cf."""
        if self is BehaviorCode.CF:
            return None
        last = self.value[-1]
        return "c" if last in "cs" else last


def place_kind(place: str) -> str:
    if not PLACE_RE.match(place):
        raise ValueError(f"malformed place id {place!r}")
    if place.startswith("EO"):
        return "EO"
    return place[0]


_FAMILY_KINDS = {
    "oo": ("O", ("C", "EO")),
    "cf": ("C", ("H", "EO")),
    "io": ("EO", ("O",)),
    "ch": ("H", ("C",)),
    "cc": ("C", ("C",)),
}


@dataclass(frozen=True, order=True)
class Triplet:
    frm: str
    code: BehaviorCode
    to: str

    def __post_init__(self):
        if not isinstance(self.code, BehaviorCode):
            object.__setattr__(self, "code", BehaviorCode(self.code))

    def __str__(self) -> str:
        return f"{self.frm} --{self.code.value}--> {self.to}"

    @classmethod
    def parse(cls, line: str) -> "Triplet":
        m = re.fullmatch(r"\s*(\S+)\s+--(\w+)-->\s+(\S+)\s*", line)
        if not m:
            raise ValueError(f"not a triplet: {line!r}")
        frm, code, to = m.groups()
        try:
            bc = BehaviorCode(code)
        except ValueError:
            raise ValueError(f"unknown behavior code {code!r}") from None
        place_kind(frm)
        place_kind(to)
        return cls(frm, bc, to)

    def compatible(self) -> bool:
        src, dst = _FAMILY_KINDS[self.code.family]
        fk, tk = place_kind(self.frm), place_kind(self.to)
        if self.code is BehaviorCode.OOC:
            return fk == "O" and tk == "EO"
        if self.code.family == "oo":
            return fk == "O" and tk == "C"
        return fk == src and tk in dst


def turn_code(h_in: int, h_out: int) -> str | None:
    d = (h_out - h_in) % 4
    return {0: "c", 1: "l", 3: "r"}.get(d)


@dataclass
class SemanticGraph:
    nodes: tuple[str, ...]
    triplets: tuple[Triplet, ...]
    meta: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        self._out: dict[str, list[Triplet]] = {n: [] for n in self.nodes}
        for t in self.triplets:
            self._out.setdefault(t.frm, []).append(t)
        for v in self._out.values():
            v.sort(key=lambda t: (t.code.value, t.to))

    def out_edges(self, place: str) -> list[Triplet]:
        return self._out.get(place, [])

    def offices(self) -> list[str]:
        return [n for n in self.nodes if place_kind(n) == "O"]

    # -- traversal rule -------------------------------------------------------

    def successors(self, place: str, ctx):
        """Yield (triplet, next context) pairs allowed from ``place`` in context ``ctx``."""
        kind = place_kind(place)
        for t in self.out_edges(place):
            nxt = self._follow(kind, t, ctx)
            if nxt is not False:
                yield t, nxt

    def _follow(self, kind, t: Triplet, ctx):
        meta = self.meta
        code = t.code
        if kind == "O":
            if code is BehaviorCode.OOC:
                return "c"
            return meta[t.frm]["progress"][t.to]
        if kind == "C":
            here = meta[t.frm]
            if code is BehaviorCode.CF and place_kind(t.to) == "EO":
                ahead = meta[t.to]["progress"][t.frm]
                start = 0.0 if ctx is None else ctx
                return here["heading"] if ahead >= start + MIN_AHEAD else False
            if code is BehaviorCode.CF:
                return here["heading"]
            return None
        if kind == "H":
            if ctx is None:
                return None
            d = turn_code(ctx, meta[t.to]["heading"])
            return None if d is not None and d == code.direction else False
        if kind == "EO":
            if ctx == "c" or ctx is None:
                return None
            d = turn_code(ctx, meta[t.frm]["normal"])
            return None if d == code.direction else False
        return False


@dataclass
class Plan:
    start: str
    goal: str
    triplets: list[Triplet]

    def __len__(self) -> int:
        return len(self.triplets)

    def to_text(self) -> str:
        return "\n".join([f"S:{self.start} G:{self.goal}"] + [str(t) for t in self.triplets]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Plan":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        m = re.fullmatch(r"\s*S:(\S+)\s+G:(\S+)\s*", lines[0])
        if not m:
            raise ValueError("plan header must read 'S:<place> G:<place>'")
        return cls(m.group(1), m.group(2), [Triplet.parse(ln) for ln in lines[1:]])


# ----------------------------------------------------------------------------
# extraction


def _compass_of(axis: int, direction: str) -> int:
    if axis == 0:
        return 0 if direction == "r" else 2
    return 1 if direction == "r" else 3


def _corridor_dir_with_heading(cid: str, axis: int, heading: int) -> str | None:
    for d in "rl":
        if _compass_of(axis, d) == heading:
            return cid + d
    return None


def extract_graph(plan: FloorPlan) -> SemanticGraph:
    rooms = plan.rooms
    nodes: list[str] = []
    triplets: set[Triplet] = set()
    meta: dict[str, dict] = {}

    corridors = plan.corridors()
    incident: dict[str, list[tuple[str, int]]] = {}  # node id -> [(corridor id, heading leaving node)]
    for c in corridors:
        if len(c.links) != 2 or any(l not in rooms for l in c.links):
            raise ExtractionError(f"corridor {c.id} is not joined to two lattice nodes")
        ax = c.axis
        lo = c.x0 if ax == 0 else c.y0
        hi = c.x1 if ax == 0 else c.y1
        cx, cy = c.center
        for d in "rl":
            nid = c.id + d
            nodes.append(nid)
            if ax == 0:
                anchor = (float(c.x0 if d == "r" else c.x1), cy)
            else:
                anchor = (cx, float(c.y0 if d == "r" else c.y1))
            meta[nid] = {"corridor": c.id, "axis": ax, "heading": _compass_of(ax, d),
                         "lo": lo, "hi": hi, "end": c.links[1] if d == "r" else c.links[0], "anchor": anchor}
        incident.setdefault(c.links[0], []).append((c.id, _compass_of(ax, "r")))
        incident.setdefault(c.links[1], []).append((c.id, _compass_of(ax, "l")))

    doors: dict[str, tuple[str, int, float]] = {}
    for o in plan.offices():
        if not o.doors or not o.links or o.links[0] not in rooms or rooms[o.links[0]].kind != "corridor":
            raise ExtractionError(f"office {o.id} has no doorway onto a corridor")
        c = rooms[o.links[0]]
        dx, dy = o.doors[0]
        if c.axis == 0:
            side = 1 if dy >= c.y1 else -1
            along = dx + 0.5
            normal = 1 if side > 0 else 3
        else:
            side = 1 if dx >= c.x1 else -1
            along = dy + 0.5
            normal = 0 if side > 0 else 2
        doors[o.id] = (c.id, normal, along)
        nodes += [o.id, "E" + o.id]
        lo = c.x0 if c.axis == 0 else c.y0
        hi = c.x1 if c.axis == 0 else c.y1
        prog = {c.id + "r": along - lo, c.id + "l": hi - along}
        meta[o.id] = {"corridor": c.id, "normal": normal, "progress": {}, "anchor": o.center}
        meta["E" + o.id] = {"corridor": c.id, "normal": normal, "progress": prog, "along": along,
                            "anchor": (dx + 0.5, dy + 0.5)}
        exit_heading = (normal + 2) % 4
        for code, dh in ((BehaviorCode.OOL, 1), (BehaviorCode.OOR, 3)):
            cnode = _corridor_dir_with_heading(c.id, c.axis, (exit_heading + dh) % 4)
            triplets.add(Triplet(o.id, code, cnode))
            meta[o.id]["progress"][cnode] = prog[cnode]
        triplets.add(Triplet("E" + o.id, BehaviorCode.IOL, o.id))
        triplets.add(Triplet("E" + o.id, BehaviorCode.IOR, o.id))
        for d in "rl":
            triplets.add(Triplet(c.id + d, BehaviorCode.CF, "E" + o.id))

    for a, (ca, na, pa) in doors.items():
        for b, (cb, nb, pb) in doors.items():
            if a != b and ca == cb and na == (nb + 2) % 4 and abs(pa - pb) < 1e-9:
                triplets.add(Triplet(a, BehaviorCode.OOC, "E" + b))

    for h in plan.halls():
        nodes.append(h.id)
        meta[h.id] = {"anchor": h.center}
        entries = incident.get(h.id, [])
        for cin, h_leave_in in entries:
            arrive = (h_leave_in + 2) % 4
            in_node = _corridor_dir_with_heading(cin, rooms[cin].axis, arrive)
            triplets.add(Triplet(in_node, BehaviorCode.CF, h.id))
            for cout, h_out in entries:
                if cout == cin:
                    continue
                d = turn_code(arrive, h_out)
                if d is None:
                    continue
                code = BehaviorCode("ch" + ("s" if d == "c" else d))
                triplets.add(Triplet(h.id, code, _corridor_dir_with_heading(cout, rooms[cout].axis, h_out)))

    for j in (r for r in rooms.values() if r.kind == "junction"):
        entries = incident.get(j.id, [])
        for cin, h_leave_in in entries:
            arrive = (h_leave_in + 2) % 4
            in_node = _corridor_dir_with_heading(cin, rooms[cin].axis, arrive)
            for cout, h_out in entries:
                if cout == cin:
                    continue
                d = turn_code(arrive, h_out)
                if d is None:
                    continue
                code = BehaviorCode("cc" + d)
                triplets.add(Triplet(in_node, code, _corridor_dir_with_heading(cout, rooms[cout].axis, h_out)))

    for r in rooms.values():
        if r.kind not in ("office", "corridor", "hall", "junction"):
            raise ExtractionError(f"room {r.id} has unknown kind {r.kind!r}")
    bad = [t for t in triplets if not t.compatible()]
    if bad:
        raise ExtractionError(f"incompatible triplet {bad[0]}")
    return SemanticGraph(nodes=tuple(sorted(set(nodes), key=_place_sort_key)),
                         triplets=tuple(sorted(triplets, key=lambda t: (_place_sort_key(t.frm), t.code.value, _place_sort_key(t.to)))),
                         meta=meta)


def _place_sort_key(place: str):
    kind = place_kind(place)
    num = int(re.sub(r"\D", "", place))
    return ({"O": 0, "EO": 1, "C": 2, "H": 3}[kind], num, place)


# ----------------------------------------------------------------------------
# planning


def plan_route(graph: SemanticGraph, start: str, goal: str) -> Plan:
    """Minimum-hop behavioral plan between two offices."""
    for p in (start, goal):
        if p not in graph._out or place_kind(p) != "O":
            raise UnknownPlace(p)
    if start == goal:
        return Plan(start, goal, [])
    s0 = (start, None)
    parent: dict = {s0: None}
    queue = deque([s0])
    while queue:
        state = queue.popleft()
        place, ctx = state
        for t, nctx in graph.successors(place, ctx):
            nxt = (t.to, nctx)
            if nxt in parent:
                continue
            parent[nxt] = (state, t)
            if t.to == goal:
                path = []
                cur = nxt
                while parent[cur] is not None:
                    prev, tt = parent[cur]
                    path.append(tt)
                    cur = prev
                return Plan(start, goal, path[::-1])
            queue.append(nxt)
    raise NoRoute(f"{goal} unreachable from {start}")


# ----------------------------------------------------------------------------
# text formats


def graph_to_text(graph: SemanticGraph) -> str:
    import json

    lines = [str(t) for t in graph.triplets]
    for n in graph.nodes:
        lines.append(f"@{n} {json.dumps(graph.meta.get(n, {}), sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _untuple(obj):
    if isinstance(obj, dict):
        return {k: _untuple(v) for k, v in obj.items()}
    if isinstance(obj, list) and len(obj) == 2 and all(isinstance(v, (int, float)) for v in obj):
        return tuple(obj)
    return obj


def graph_from_text(text: str) -> SemanticGraph:
    import json

    triplets = []
    nodes = []
    meta = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("@"):
            name, _, payload = line[1:].partition(" ")
            place_kind(name)
            nodes.append(name)
            meta[name] = _untuple(json.loads(payload))
        else:
            triplets.append(Triplet.parse(line))
    if not nodes:
        nodes = sorted({p for t in triplets for p in (t.frm, t.to)}, key=_place_sort_key)
    return SemanticGraph(nodes=tuple(nodes), triplets=tuple(triplets), meta=meta)
