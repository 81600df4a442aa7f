"""Seeded, deterministic placement of object instances.

Instances are ``<object_id>#<k>``.  Relations use all-pairs semantics: a
relation between two objects must hold for every pair of their instances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ClawCanvasError
from .jsonutil import dumps_fixed
from .prng import SplitMix64
from .records import SceneRecord, validate

SIZE_FRACTION = {"small": 0.08, "medium": 0.14, "large": 0.22}
DEFAULT_SIZE = "medium"
NEAR_FACTOR = 0.25
OVERLAP_MIN = 0.20
REPAIR_BUDGET = 1000
MARGIN = 0.04
MAX_INSTANCES = 64

_CANDIDATES = 48
_RESTART_EVERY = 150
_GAP = 0.02


class LayoutError(ClawCanvasError):
    pass


class Unsatisfiable(LayoutError):
    def __init__(self, constraints: list[str]):
        self.constraints = constraints
        super().__init__("no layout found: " + "; ".join(constraints[:8]))


class InstanceOverflow(LayoutError):
    def __init__(self, total: int):
        self.total = total
        super().__init__(f"{total} instances exceed the limit of {MAX_INSTANCES}")


class InstanceMismatch(LayoutError):
    def __init__(self, missing: list[str], unexpected: list[str]):
        self.missing = missing
        self.unexpected = unexpected
        super().__init__(f"instances differ from the record: missing {missing}, unexpected {unexpected}")


@dataclass(frozen=True)
class Placement:
    instance_id: str
    bbox: tuple[float, float, float, float]
    z: int

    @property
    def object_id(self) -> str:
        return self.instance_id.split("#", 1)[0]


@dataclass(frozen=True)
class LayoutSolution:
    placements: tuple[Placement, ...]
    seed: int
    iterations_used: int = 0

    def by_id(self) -> dict[str, Placement]:
        return {p.instance_id: p for p in self.placements}


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    object: str | None
    detail: str
    instances: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.object is None:
            return f"{self.kind}({self.subject}): {self.detail}"
        return f"{self.kind}({self.subject}, {self.object}): {self.detail}"


@dataclass(frozen=True)
class SolverParams:
    near_factor: float = NEAR_FACTOR
    overlap_min: float = OVERLAP_MIN
    repair_budget: int = REPAIR_BUDGET


def edge_length(size_class: str | None, width: int, height: int) -> float:
    return round(SIZE_FRACTION[size_class or DEFAULT_SIZE] * min(width, height), 2)


def expand_instances(record: SceneRecord) -> list[str]:
    return [f"{o.id}#{k}" for o in record.objects for k in range(o.count)]


# --- geometric predicates -----------------------------------------------------
# Boxes are (x, y, w, h).  `eps` loosens boundary comparisons in favour of
# holding; the solver uses 0, the canvas verifier 1 px.


def center(b):
    return (b[0] + b[2] / 2.0, b[1] + b[3] / 2.0)


def intersection_area(a, b) -> float:
    w = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    h = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    return w * h if w > 0 and h > 0 else 0.0


def overlaps(a, b, eps: float = 0.0) -> bool:
    w = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    h = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    return w > eps and h > eps


def left_of(a, b, eps: float = 0.0) -> bool:
    return a[0] + a[2] / 2.0 < b[0] + b[2] / 2.0 + eps and a[0] + a[2] < b[0] + eps


def above(a, b, eps: float = 0.0) -> bool:
    return a[1] + a[3] / 2.0 < b[1] + b[3] / 2.0 + eps and a[1] + a[3] < b[1] + eps


def inside(a, b, eps: float = 0.0) -> bool:
    return (
        a[0] >= b[0] - eps
        and a[1] >= b[1] - eps
        and a[0] + a[2] <= b[0] + b[2] + eps
        and a[1] + a[3] <= b[1] + b[3] + eps
    )


def near(a, b, threshold: float, eps: float = 0.0) -> bool:
    (ax, ay), (bx, by) = center(a), center(b)
    return math.hypot(ax - bx, ay - by) <= threshold + eps


def occlusion_geometry(a, b, overlap_min: float, eps: float = 0.0) -> bool:
    """The area part of ``occludes(a, b)``: a covers b by at least overlap_min of a's area."""
    if eps:
        grown = (b[0] - eps, b[1] - eps, b[2] + 2 * eps, b[3] + 2 * eps)
        return intersection_area(a, grown) >= overlap_min * a[2] * a[3]
    return intersection_area(a, b) >= overlap_min * a[2] * a[3]


def relation_holds(kind: str, a, b, *, threshold: float, overlap_min: float = OVERLAP_MIN, eps: float = 0.0) -> bool:
    """Geometric truth of one relation for one instance pair (z excluded for occludes)."""
    if kind == "left_of":
        return left_of(a, b, eps)
    if kind == "right_of":
        return left_of(b, a, eps)
    if kind == "above":
        return above(a, b, eps)
    if kind == "below":
        return above(b, a, eps)
    if kind == "inside":
        return inside(a, b, eps)
    if kind == "near":
        return near(a, b, threshold, eps)
    if kind == "occludes":
        return occlusion_geometry(a, b, overlap_min, eps)
    raise ValueError(f"unknown relation kind {kind!r}")


def linked_pairs(record: SceneRecord) -> set[frozenset[str]]:
    """Object pairs that may overlap: direct occludes, or connected by a chain of inside."""
    linked: set[frozenset[str]] = set()
    contains: dict[str, set[str]] = {}
    for r in record.relations:
        if r.kind == "occludes":
            linked.add(frozenset((r.subject, r.object)))
        elif r.kind == "inside":
            contains.setdefault(r.subject, set()).add(r.object)
    for start in contains:
        stack, seen = list(contains[start]), set()
        while stack:
            n = stack.pop()
            if n in seen or n == start:
                continue
            seen.add(n)
            linked.add(frozenset((start, n)))
            stack.extend(contains.get(n, ()))
    return linked


def evaluate_pairs(
    boxes: dict[str, tuple],
    zs: dict[str, int] | None,
    record: SceneRecord,
    *,
    near_factor: float = NEAR_FACTOR,
    overlap_min: float = OVERLAP_MIN,
    eps: float = 0.0,
) -> list[Violation]:
    """Check every relation (all-pairs) and pairwise disjointness over instance boxes.

    Instance ids map to objects through their ``<object>#`` prefix; z is only
    consulted for occludes when `zs` is given.
    """
    W, H = record.canvas.width, record.canvas.height
    threshold = near_factor * min(W, H)
    groups: dict[str, list[str]] = {}
    for iid in boxes:
        groups.setdefault(iid.split("#", 1)[0], []).append(iid)
    out: list[Violation] = []
    for r in record.relations:
        bad_geo, bad_z = [], []
        for ai in groups.get(r.subject, []):
            for bj in groups.get(r.object, []):
                if not relation_holds(r.kind, boxes[ai], boxes[bj], threshold=threshold, overlap_min=overlap_min, eps=eps):
                    bad_geo.append((ai, bj))
                if r.kind == "occludes" and zs is not None and not zs[ai] > zs[bj]:
                    bad_z.append((ai, bj))
        if bad_geo:
            inst = tuple(sorted({i for p in bad_geo for i in p}))
            out.append(Violation(r.kind, r.subject, r.object, f"{len(bad_geo)} instance pair(s) violate {r.kind}", inst))
        if bad_z:
            inst = tuple(sorted({i for p in bad_z for i in p}))
            out.append(Violation("z_order", r.subject, r.object, f"{len(bad_z)} occluding pair(s) not drawn above", inst))
    linked = linked_pairs(record)
    ids = sorted(boxes)
    for i, a in enumerate(ids):
        oa = a.split("#", 1)[0]
        for b in ids[i + 1 :]:
            ob = b.split("#", 1)[0]
            if oa != ob and frozenset((oa, ob)) in linked:
                continue
            if overlaps(boxes[a], boxes[b], eps):
                out.append(Violation("overlap", a, b, "unrelated instances overlap", (a, b)))
    return out


def check_placement(
    solution: LayoutSolution,
    record: SceneRecord,
    *,
    near_factor: float = NEAR_FACTOR,
    overlap_min: float = OVERLAP_MIN,
) -> list[Violation]:
    """Independent oracle: empty iff every constraint holds for the placements."""
    expected = expand_instances(record)
    got = [p.instance_id for p in solution.placements]
    if sorted(expected) != sorted(got) or len(set(got)) != len(got):
        raise InstanceMismatch(sorted(set(expected) - set(got)), sorted(set(got) - set(expected)))
    W, H = record.canvas.width, record.canvas.height
    out: list[Violation] = []
    for p in solution.placements:
        x, y, w, h = p.bbox
        if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > W or y + h > H:
            out.append(Violation("bounds", p.instance_id, None, "placement leaves the canvas", (p.instance_id,)))
    boxes = {p.instance_id: p.bbox for p in solution.placements}
    zs = {p.instance_id: p.z for p in solution.placements}
    out.extend(evaluate_pairs(boxes, zs, record, near_factor=near_factor, overlap_min=overlap_min))
    return out


# --- solver -------------------------------------------------------------------


@dataclass
class _Inst:
    iid: str
    obj: str
    index: int
    w: float
    h: float
    pin: tuple[float, float] | None = None
    xr: tuple[float, float] = (0.0, 0.0)
    yr: tuple[float, float] = (0.0, 0.0)
    # (kind, other instance index, subject?) for every pairwise constraint
    rels: list = field(default_factory=list)
    free_overlap: set = field(default_factory=set)


def _layers(n: int, edges: list[tuple[int, int]]) -> dict[int, tuple[int, int]]:
    """For nodes touching `edges`: (earliest, latest) layer under longest-path layering."""
    nodes = sorted({i for e in edges for i in e})
    if not nodes:
        return {}
    succ = {i: [] for i in nodes}
    pred = {i: [] for i in nodes}
    for a, b in edges:
        succ[a].append(b)
        pred[b].append(a)
    order, indeg = [], {i: len(pred[i]) for i in nodes}
    ready = [i for i in nodes if indeg[i] == 0]
    while ready:
        ready.sort()
        i = ready.pop(0)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    depth = {i: 0 for i in nodes}
    for i in order:
        for j in succ[i]:
            depth[j] = max(depth[j], depth[i] + 1)
    height = {i: 0 for i in nodes}
    for i in reversed(order):
        for j in succ[i]:
            height[i] = max(height[i], height[j] + 1)
    total = max(depth.values()) + 1
    return {i: (depth[i], total - 1 - height[i]) for i in nodes}


def _bands(extent: float, sizes: list[float], layers: dict[int, tuple[int, int]], margin: float):
    """Split [margin, extent - margin] into one band per layer; returns band intervals."""
    if not layers:
        return []
    total = max(hi for _, hi in layers.values()) + 1
    usable = extent - 2 * margin
    even = usable / total
    widest = [0.0] * total
    for i, (lo, hi) in layers.items():
        if lo == hi:
            widest[lo] = max(widest[lo], sizes[i])
    if all(w <= even for w in widest) or sum(widest) > usable:
        widths = [even] * total
    else:
        slack = (usable - sum(widest)) / total
        widths = [w + slack for w in widest]
    bands, pos = [], margin
    for w in widths:
        bands.append((pos, pos + w))
        pos += w
    return bands


class _Solver:
    def __init__(self, record: SceneRecord, params: SolverParams):
        self.record = record
        self.params = params
        c = record.canvas
        self.W, self.H = c.width, c.height
        self.threshold = params.near_factor * min(self.W, self.H)
        self.rng = SplitMix64(c.seed)
        self.insts: list[_Inst] = []
        by_obj: dict[str, list[int]] = {}
        for o in record.objects:
            e = edge_length(o.size_class, self.W, self.H)
            for k in range(o.count):
                pin = None
                if o.explicit_position is not None:
                    cx = min(max(o.explicit_position[0] * self.W, e / 2), self.W - e / 2)
                    cy = min(max(o.explicit_position[1] * self.H, e / 2), self.H - e / 2)
                    pin = (round(cx - e / 2, 2), round(cy - e / 2, 2))
                by_obj.setdefault(o.id, []).append(len(self.insts))
                self.insts.append(_Inst(f"{o.id}#{k}", o.id, len(self.insts), e, e, pin))
        self.by_obj = by_obj
        linked = linked_pairs(record)
        for a in self.insts:
            for b in self.insts:
                if a is not b and a.obj != b.obj and frozenset((a.obj, b.obj)) in linked:
                    a.free_overlap.add(b.index)
        xedges, yedges = [], []
        self.deps: dict[int, set[int]] = {i: set() for i in range(len(self.insts))}
        for r in record.relations:
            for i in by_obj[r.subject]:
                for j in by_obj[r.object]:
                    self.insts[i].rels.append((r.kind, j, True))
                    self.insts[j].rels.append((r.kind, i, False))
                    if r.kind == "left_of":
                        xedges.append((i, j))
                    elif r.kind == "above":
                        yedges.append((i, j))
                    else:
                        self.deps[i].add(j)
        mx, my = MARGIN * self.W, MARGIN * self.H
        xl, yl = _layers(len(self.insts), xedges), _layers(len(self.insts), yedges)
        xb = _bands(self.W, [s.w for s in self.insts], xl, mx)
        yb = _bands(self.H, [s.h for s in self.insts], yl, my)
        for s in self.insts:
            s.xr = (xb[xl[s.index][0]][0], xb[xl[s.index][1]][1]) if s.index in xl else (mx, self.W - mx)
            s.yr = (yb[yl[s.index][0]][0], yb[yl[s.index][1]][1]) if s.index in yl else (my, self.H - my)
        self.order = self._placement_order()
        self.pos: list[tuple[float, float] | None] = [None] * len(self.insts)

    def _placement_order(self) -> list[int]:
        pinned = [s.index for s in self.insts if s.pin is not None]
        rest = [s.index for s in self.insts if s.pin is None]
        order: list[int] = []
        remaining = set(rest)
        while remaining:
            ready = [i for i in remaining if not (self.deps[i] & remaining)] or list(remaining)
            i = min(ready, key=lambda i: (-self.insts[i].w * self.insts[i].h, i))
            order.append(i)
            remaining.discard(i)
        return pinned + order

    # geometry helpers
    def box(self, i: int, pos=None):
        s = self.insts[i]
        x, y = pos if pos is not None else self.pos[i]
        return (x, y, s.w, s.h)

    def pair_cost(self, i: int, bi, j: int, bj) -> int:
        s = self.insts[i]
        cost = 0
        for kind, other, subj in s.rels:
            if other != j:
                continue
            a, b = (bi, bj) if subj else (bj, bi)
            if not relation_holds(kind, a, b, threshold=self.threshold, overlap_min=self.params.overlap_min):
                cost += 1
        if j not in s.free_overlap and overlaps(bi, bj):
            cost += 1
        return cost

    def cost_of(self, i: int, pos, skip: int | None = None) -> int:
        bi = self.box(i, pos)
        total = 0
        for j, pj in enumerate(self.pos):
            if j == i or pj is None or j == skip:
                continue
            total += self.pair_cost(i, bi, j, self.box(j))
        return total

    def _clip(self, lo: float, hi: float, size: float, limit: float) -> tuple[float, float]:
        """Feasible range of the top-left coordinate for a span [lo, hi]."""
        a, b = lo, hi - size
        if a > b:
            mid = (lo + hi) / 2 - size / 2
            a = b = min(max(mid, 0.0), limit - size)
        return max(a, 0.0), min(b, limit - size)

    def candidate(self, i: int) -> tuple[float, float]:
        s = self.insts[i]
        # hard limits from partners already on the canvas
        hx0, hx1, hy0, hy1 = 0.0, self.W - s.w, 0.0, self.H - s.h
        anchors = []
        for kind, j, subj in s.rels:
            if self.pos[j] is None:
                continue
            bj = self.box(j)
            if kind == "left_of":
                if subj:
                    hx1 = min(hx1, bj[0] - s.w - _GAP)
                else:
                    hx0 = max(hx0, bj[0] + bj[2] + _GAP)
            elif kind == "above":
                if subj:
                    hy1 = min(hy1, bj[1] - s.h - _GAP)
                else:
                    hy0 = max(hy0, bj[1] + bj[3] + _GAP)
            elif kind == "inside":
                # containers move freely; their contents are re-placed after them
                if subj:
                    hx0, hx1 = max(hx0, bj[0]), min(hx1, bj[0] + bj[2] - s.w)
                    hy0, hy1 = max(hy0, bj[1]), min(hy1, bj[1] + bj[3] - s.h)
            else:
                anchors.append((kind, bj))
        if hx0 > hx1 or hy0 > hy1:
            hx0, hx1, hy0, hy1 = 0.0, self.W - s.w, 0.0, self.H - s.h
        # preferred band, when it agrees with the hard limits
        bx0, bx1 = self._clip(*s.xr, s.w, self.W)
        by0, by1 = self._clip(*s.yr, s.h, self.H)
        x0, x1, y0, y1 = max(hx0, bx0), min(hx1, bx1), max(hy0, by0), min(hy1, by1)
        if x0 > x1 or y0 > y1 or self.rng.random() < 0.2:
            x0, x1, y0, y1 = hx0, hx1, hy0, hy1
        if anchors and self.rng.random() < 0.75:
            kind, bj = anchors[self.rng.randbelow(len(anchors))]
            cx, cy = center(bj)
            if kind == "near":
                r = self.threshold * math.sqrt(self.rng.random())
                t = 2 * math.pi * self.rng.random()
                px, py = cx + r * math.cos(t) - s.w / 2, cy + r * math.sin(t) - s.h / 2
            else:
                rx, ry = (s.w + bj[2]) / 2 * 0.7, (s.h + bj[3]) / 2 * 0.7
                px = cx + self.rng.uniform(-rx, rx) - s.w / 2
                py = cy + self.rng.uniform(-ry, ry) - s.h / 2
            x = min(max(px, x0), x1)
            y = min(max(py, y0), y1)
        else:
            x = self.rng.uniform(x0, x1)
            y = self.rng.uniform(y0, y1)
        return (round(x, 2), round(y, 2))

    def place(self, i: int) -> int:
        s = self.insts[i]
        if s.pin is not None:
            self.pos[i] = s.pin
            return self.cost_of(i, s.pin)
        best, best_cost = None, None
        for _ in range(_CANDIDATES):
            cand = self.candidate(i)
            cost = self.cost_of(i, cand)
            if best_cost is None or cost < best_cost:
                best, best_cost = cand, cost
                if cost == 0:
                    break
        self.pos[i] = best
        return best_cost

    def initial(self) -> None:
        self.pos = [None] * len(self.insts)
        for i in self.order:
            self.place(i)

    def violators(self) -> list[int]:
        bad = set()
        n = len(self.insts)
        for i in range(n):
            bi = self.box(i)
            for j in range(i + 1, n):
                if self.pair_cost(i, bi, j, self.box(j)):
                    bad.update((i, j))
        return sorted(bad)

    def run(self) -> tuple[list[tuple[float, float]], int]:
        self.initial()
        movable = [s.pin is None for s in self.insts]
        iterations = 0
        since_restart = 0
        while True:
            bad = self.violators()
            if not bad:
                return self.pos, iterations
            if iterations >= self.params.repair_budget:
                return None, iterations
            iterations += 1
            since_restart += 1
            if since_restart >= _RESTART_EVERY:
                since_restart = 0
                self.initial()
                continue
            candidates = [i for i in bad if movable[i]]
            if not candidates:
                return None, iterations
            i = candidates[self.rng.randbelow(len(candidates))]
            self.replace_with_contents(i)

    def replace_with_contents(self, i: int) -> None:
        stack, seen = [i], set()
        while stack:
            k = stack.pop(0)
            if k in seen or self.insts[k].pin is not None:
                continue
            seen.add(k)
            self.pos[k] = None
            self.place(k)
            stack.extend(j for kind, j, subj in self.insts[k].rels if kind == "inside" and not subj)


def _prechecks(record: SceneRecord, params: SolverParams) -> list[str]:
    problems = []
    W, H = record.canvas.width, record.canvas.height
    objs = {o.id: o for o in record.objects}
    for r in record.relations:
        a, b = objs[r.subject], objs[r.object]
        ea, eb = edge_length(a.size_class, W, H), edge_length(b.size_class, W, H)
        if r.kind == "inside":
            if ea > eb:
                problems.append(f"inside({a.id}, {b.id}): {a.id} is larger than its container")
            if b.count > 1:
                problems.append(f"inside({a.id}, {b.id}): a container with count > 1 cannot hold every instance")
        elif r.kind == "occludes":
            if min(ea, eb) ** 2 < params.overlap_min * ea * ea:
                problems.append(f"occludes({a.id}, {b.id}): {b.id} is too small to be covered by the required fraction")
    return problems


def solve(record: SceneRecord, params: SolverParams | None = None) -> LayoutSolution:
    params = params or SolverParams()
    total = record.total_instances
    if total > MAX_INSTANCES:
        raise InstanceOverflow(total)
    report = validate(record)
    if report.has_cycles():
        raise Unsatisfiable([i.detail for i in report.issues if i.code.startswith("Cyclic")])
    problems = _prechecks(record, params)
    if problems:
        raise Unsatisfiable(problems)
    if total == 0:
        return LayoutSolution((), record.canvas.seed, 0)
    solver = _Solver(record, params)
    pos, iterations = solver.run()
    if pos is None:
        boxes = {s.iid: solver.box(s.index) for s in solver.insts}
        left = evaluate_pairs(boxes, None, record, near_factor=params.near_factor, overlap_min=params.overlap_min)
        raise Unsatisfiable([str(v) for v in left] or ["repair budget exhausted"])
    zs = assign_z(record, [s.iid for s in solver.insts])
    placements = tuple(
        Placement(s.iid, (pos[s.index][0], pos[s.index][1], s.w, s.h), zs[s.iid]) for s in solver.insts
    )
    return LayoutSolution(placements, record.canvas.seed, iterations)


def assign_z(record: SceneRecord, instance_ids: list[str]) -> dict[str, int]:
    """Base z follows instance order; occludes(a, b) lifts every a above every b."""
    objs = [o.id for o in record.objects]
    below: dict[str, set[str]] = {o: set() for o in objs}
    for r in record.relations:
        if r.kind == "occludes":
            below[r.subject].add(r.object)
    rank, done = {}, set()
    pending = list(objs)
    while pending:
        ready = [o for o in pending if below[o] <= done] or pending[:1]
        o = ready[0]
        rank[o] = len(done)
        done.add(o)
        pending.remove(o)
    ordered = sorted(instance_ids, key=lambda iid: (rank[iid.split("#", 1)[0]], instance_ids.index(iid)))
    return {iid: z for z, iid in enumerate(ordered)}


# --- layout.json ---------------------------------------------------------------


def layout_to_json(solution: LayoutSolution) -> bytes:
    doc = {
        "iterations_used": solution.iterations_used,
        "placements": [
            {"bbox": [float(v) for v in p.bbox], "instance_id": p.instance_id, "z": p.z}
            for p in solution.placements
        ],
        "seed": solution.seed,
    }
    return dumps_fixed(doc).encode("utf-8")


def layout_from_json(data: bytes | str) -> LayoutSolution:
    d = json.loads(data)
    return LayoutSolution(
        tuple(Placement(p["instance_id"], tuple(float(v) for v in p["bbox"]), int(p["z"])) for p in d["placements"]),
        int(d["seed"]),
        int(d.get("iterations_used", 0)),
    )
