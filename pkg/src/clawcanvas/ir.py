"""Canvas IR and the record + layout -> IR compiler."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ClawCanvasError
from .records import SceneRecord, TextSpec
from .layout import LayoutSolution

NODE_KINDS = ("rect", "ellipse", "polygon", "text", "group")
FONT_PX = {"title": 64, "subtitle": 40, "body": 24, "caption": 16}
ANCHOR = {"left": "start", "center": "middle", "right": "end"}
BACKGROUND_ID = "__background__"


class GeometryOverflow(ClawCanvasError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"node {node_id!r} lies outside the canvas")


@dataclass(frozen=True)
class CanvasNode:
    id: str
    kind: str
    z: int = 0
    label: str | None = None
    color: str | None = None
    bbox: tuple[float, float, float, float] | None = None
    points: tuple[tuple[float, float], ...] | None = None
    anchor: tuple[float, float] | None = None
    size_class: str | None = None
    alignment: str | None = None
    content: str | None = None
    children: tuple["CanvasNode", ...] = ()

    def bounds(self) -> tuple[float, float, float, float] | None:
        """Axis-aligned box of the drawn geometry (None for text and empty groups)."""
        if self.bbox is not None:
            return self.bbox
        if self.points:
            xs = [p[0] for p in self.points]
            ys = [p[1] for p in self.points]
            return (min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))
        return None

    def center(self) -> tuple[float, float] | None:
        if self.kind == "text":
            return self.anchor
        b = self.bounds()
        if b is None:
            return None
        return (b[0] + b[2] / 2.0, b[1] + b[3] / 2.0)


def node_sort_key(n: CanvasNode):
    return (n.z, n.id)


@dataclass(frozen=True)
class CanvasIR:
    width: int
    height: int
    nodes: tuple[CanvasNode, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=node_sort_key)))

    def walk(self):
        stack = list(reversed(self.nodes))
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.children))

    def find(self, node_id: str) -> CanvasNode:
        for n in self.walk():
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def with_nodes(self, nodes) -> "CanvasIR":
        return CanvasIR(self.width, self.height, tuple(nodes))


def check_ir(ir: CanvasIR) -> list[str]:
    """Invariant violations of an IR (empty when well formed)."""
    problems = []
    seen = set()
    eps = 1e-6
    for n in ir.walk():
        if n.id in seen:
            problems.append(f"duplicate node id {n.id!r}")
        seen.add(n.id)
        if n.kind not in NODE_KINDS:
            problems.append(f"{n.id}: unknown kind {n.kind!r}")
        if n.kind == "text" and not n.content:
            problems.append(f"{n.id}: text without content")
        if n.kind == "polygon" and (not n.points or len(n.points) < 3):
            problems.append(f"{n.id}: polygon needs at least 3 vertices")
        b = n.bounds() if n.kind != "text" else (n.anchor + (0.0, 0.0) if n.anchor else None)
        if b is not None and (b[0] < -eps or b[1] < -eps or b[0] + b[2] > ir.width + eps or b[1] + b[3] > ir.height + eps):
            problems.append(f"{n.id}: geometry outside the canvas")
    return problems


def _q(v: float) -> float:
    return round(v, 2)


def polygon_points(bbox) -> tuple[tuple[float, float], ...]:
    """Hexagon inscribed in the box; its bounds are the box itself."""
    x, y, w, h = bbox
    pts = [
        (x + w / 4, y),
        (x + 3 * w / 4, y),
        (x + w, y + h / 2),
        (x + 3 * w / 4, y + h),
        (x + w / 4, y + h),
        (x, y + h / 2),
    ]
    return tuple((_q(px), _q(py)) for px, py in pts)


def text_node(t: TextSpec, width: int, height: int, z: int) -> CanvasNode:
    rx, ry, rw, rh = t.region
    left, top = rx * width, ry * height
    w, h = rw * width, rh * height
    ax = {"left": left, "center": left + w / 2, "right": left + w}[t.alignment]
    ay = top + h / 2
    return CanvasNode(
        id=t.id,
        kind="text",
        z=z,
        anchor=(_q(min(ax, width)), _q(min(ay, height))),
        size_class=t.size_class,
        alignment=t.alignment,
        content=t.content,
    )


def compile_canvas(record: SceneRecord, layout: LayoutSolution) -> CanvasIR:
    W, H = record.canvas.width, record.canvas.height
    nodes: list[CanvasNode] = []
    if record.canvas.background is not None:
        nodes.append(CanvasNode(BACKGROUND_ID, "rect", -1, None, record.canvas.background, (0.0, 0.0, float(W), float(H))))
    placed = layout.by_id()
    top = -1
    for o in record.objects:
        kind = o.shape_hint or "rect"
        for k in range(o.count):
            p = placed[f"{o.id}#{k}"]
            bbox = tuple(_q(v) for v in p.bbox)
            top = max(top, p.z)
            if kind == "polygon":
                node = CanvasNode(p.instance_id, "polygon", p.z, o.class_label, o.color, points=polygon_points(bbox))
            else:
                node = CanvasNode(p.instance_id, kind, p.z, o.class_label, o.color, bbox)
            nodes.append(node)
    for offset, t in enumerate(sorted(record.texts, key=lambda t: t.id)):
        nodes.append(text_node(t, W, H, top + 1 + offset))
    ir = CanvasIR(W, H, tuple(nodes))
    for problem in check_ir(ir):
        raise GeometryOverflow(problem.split(":", 1)[0])
    return ir


def restack(ir: CanvasIR, node_id: str, z: int) -> CanvasIR:
    return ir.with_nodes(replace(n, z=z) if n.id == node_id else n for n in ir.nodes)
