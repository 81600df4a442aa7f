"""Structural verification of canvases against their scene records.

Categories mirror compositional-control benchmarks: count, color, position,
size, multi_count, text and z_order.  Nodes map to object specs through the
``<object_id>#k`` id prefix; nodes whose id carries ``:`` are
annotations and are ignored.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

from .ir import BACKGROUND_ID, CanvasIR, CanvasNode
from .jsonutil import dumps_fixed
from .layout import NEAR_FACTOR, OVERLAP_MIN, SIZE_FRACTION, DEFAULT_SIZE, evaluate_pairs
from .records import SceneRecord

CATEGORIES = ("count", "color", "position", "size", "multi_count", "text", "z_order")
POSITION_EPS = 1.0
SIZE_SLACK = 0.10


@dataclass(frozen=True)
class Check:
    category: str
    status: str  # "pass" | "fail"
    diagnostic: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[Check, ...]

    @property
    def overall(self) -> str:
        return "pass" if all(c.passed for c in self.checks) else "fail"

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def get(self, category: str) -> Check:
        return next(c for c in self.checks if c.category == category)

    def failed_categories(self) -> list[str]:
        return [c.category for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "checks": [{"category": c.category, "diagnostic": c.diagnostic, "status": c.status} for c in self.checks],
            "overall": self.overall,
        }

    def to_json(self) -> bytes:
        return dumps_fixed(self.to_dict()).encode("utf-8")

    def table(self) -> str:
        rows = [f"{'category':<12} {'status':<6} diagnostic"]
        rows += [f"{c.category:<12} {c.status:<6} {c.diagnostic}" for c in self.checks]
        rows.append(f"overall: {self.overall}")
        return "\n".join(rows)


def _is_annotation(n: CanvasNode) -> bool:
    return ":" in n.id


def _object_nodes(ir: CanvasIR, record: SceneRecord):
    """(node, object_id or None) for every shape node that is not background or annotation."""
    ids = {o.id for o in record.objects}
    by_label: dict[str, list[str]] = {}
    for o in record.objects:
        by_label.setdefault(o.class_label, []).append(o.id)
    out = []
    for n in ir.walk():
        if n.kind in ("text", "group") or n.id == BACKGROUND_ID or _is_annotation(n):
            continue
        oid = n.id.split("#", 1)[0] if "#" in n.id else None
        if oid not in ids:
            cands = by_label.get(n.label or "", [])
            oid = cands[0] if len(cands) == 1 else None
        out.append((n, oid))
    return out


def _check_count(nodes, record) -> tuple[Check, Check]:
    expected: Counter = Counter()
    for o in record.objects:
        expected[o.class_label] += o.count
    found: Counter = Counter(n.label for n, _ in nodes if n.label is not None)
    bad = []
    for label in sorted(set(expected) | set(found)):
        if expected[label] != found[label]:
            bad.append(f"{label}: expected {expected[label]}, found {found[label]}")
    unlabeled = [n.id for n, _ in nodes if n.label is None]
    if unlabeled:
        bad.append("unlabeled nodes: " + ", ".join(unlabeled))
    count = Check("count", "fail" if bad else "pass", "; ".join(bad) or f"{sum(expected.values())} nodes over {len(expected)} labels")
    if len(expected) < 2:
        multi = Check("multi_count", "pass", "not applicable: fewer than two labels")
    elif bad:
        multi = Check("multi_count", "fail", "joint tally differs: " + "; ".join(bad))
    else:
        multi = Check("multi_count", "pass", f"all {len(expected)} label tallies match jointly")
    return count, multi


def _check_color(nodes, record) -> Check:
    objs = {o.id: o for o in record.objects}
    bad = []
    for n, oid in nodes:
        if oid is None:
            continue
        want = objs[oid].color
        if want is not None and n.color != want:
            bad.append(f"{n.id}: expected {want}, found {n.color}")
    return Check("color", "fail" if bad else "pass", "; ".join(bad) or "colors match")


def _boxes(nodes) -> dict[str, tuple]:
    boxes = {}
    for n, oid in nodes:
        if oid is None:
            continue
        key = n.id if n.id.split("#", 1)[0] == oid else f"{oid}#{n.id}"
        boxes[key] = n.bounds()
    return boxes


def _check_position(nodes, record, near_factor, overlap_min) -> Check:
    boxes = _boxes(nodes)
    vs = [v for v in evaluate_pairs(boxes, None, record, near_factor=near_factor, overlap_min=overlap_min, eps=POSITION_EPS)]
    if not vs:
        return Check("position", "pass", f"{len(record.relations)} relations hold")
    return Check("position", "fail", "; ".join(str(v) + " [" + ", ".join(v.instances) + "]" for v in vs))


def _check_size(nodes, record) -> Check:
    W, H = record.canvas.width, record.canvas.height
    objs = {o.id: o for o in record.objects}
    bad = []
    for n, oid in nodes:
        if oid is None:
            continue
        size = objs[oid].size_class or DEFAULT_SIZE
        want = (SIZE_FRACTION[size] * min(W, H)) ** 2
        b = n.bounds()
        ratio = (b[2] * b[3]) / want
        if abs(ratio - 1.0) > SIZE_SLACK:
            bad.append(f"{n.id}: area is {ratio:.2f}x the {size} class")
    return Check("size", "fail" if bad else "pass", "; ".join(bad) or "sizes match their classes")


def _check_text(ir: CanvasIR, record) -> Check:
    want = [(t.id, t.content) for t in sorted(record.texts, key=lambda t: t.id)]
    got = [(n.id, n.content) for n in ir.walk() if n.kind == "text" and not _is_annotation(n)]
    if got == want:
        return Check("text", "pass", f"{len(want)} text blocks identical")
    bad = []
    gmap, wmap = dict(got), dict(want)
    for tid, content in want:
        if tid not in gmap:
            bad.append(f"{tid}: missing")
        elif gmap[tid] != content:
            bad.append(f"{tid}: expected {content!r}, found {gmap[tid]!r}")
    bad += [f"{tid}: unexpected" for tid, _ in got if tid not in wmap]
    if not bad:
        bad.append("text blocks out of order: " + ", ".join(t for t, _ in got))
    return Check("text", "fail", "; ".join(bad))


def _check_z(nodes, record) -> Check:
    zs: dict[str, list[tuple[str, int]]] = {}
    for n, oid in nodes:
        if oid is not None:
            zs.setdefault(oid, []).append((n.id, n.z))
    bad = []
    for r in record.relations:
        if r.kind != "occludes":
            continue
        for ai, za in zs.get(r.subject, []):
            for bj, zb in zs.get(r.object, []):
                if not za > zb:
                    bad.append(f"occludes({r.subject}, {r.object}): {ai} (z={za}) not above {bj} (z={zb})")
    return Check("z_order", "fail" if bad else "pass", "; ".join(bad) or "occluders drawn on top")


def verify_canvas(
    ir: CanvasIR,
    record: SceneRecord,
    *,
    near_factor: float = NEAR_FACTOR,
    overlap_min: float = OVERLAP_MIN,
) -> VerificationReport:
    nodes = _object_nodes(ir, record)
    count, multi = _check_count(nodes, record)
    checks = {
        "count": count,
        "color": _check_color(nodes, record),
        "position": _check_position(nodes, record, near_factor, overlap_min),
        "size": _check_size(nodes, record),
        "multi_count": multi,
        "text": _check_text(ir, record),
        "z_order": _check_z(nodes, record),
    }
    return VerificationReport(tuple(checks[c] for c in CATEGORIES))


def report_from_json(data: bytes | str) -> VerificationReport:
    d = json.loads(data)
    return VerificationReport(tuple(Check(c["category"], c["status"], c["diagnostic"]) for c in d["checks"]))


# --- diff ---------------------------------------------------------------------


@dataclass(frozen=True)
class CanvasDiff:
    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()
    moved: tuple[str, ...] = ()
    recolored: tuple[str, ...] = ()
    retexted: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.moved or self.recolored or self.retexted)

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in ("added", "removed", "moved", "recolored", "retexted")}


def diff_canvases(a: CanvasIR, b: CanvasIR, move_threshold: float = 1.0) -> CanvasDiff:
    na = {n.id: n for n in a.walk()}
    nb = {n.id: n for n in b.walk()}
    moved, recolored, retexted = [], [], []
    for nid in sorted(set(na) & set(nb)):
        x, y = na[nid], nb[nid]
        ca, cb = x.center(), y.center()
        if ca is not None and cb is not None:
            if ((ca[0] - cb[0]) ** 2 + (ca[1] - cb[1]) ** 2) ** 0.5 > move_threshold:
                moved.append(nid)
        if x.color != y.color:
            recolored.append(nid)
        if x.content != y.content:
            retexted.append(nid)
    return CanvasDiff(
        tuple(sorted(set(nb) - set(na))),
        tuple(sorted(set(na) - set(nb))),
        tuple(moved),
        tuple(recolored),
        tuple(retexted),
    )
