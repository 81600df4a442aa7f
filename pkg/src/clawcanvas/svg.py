"""Canonical SVG emitter and the matching subset parser.

The emitted subset is rect, ellipse, polygon, text and g.  Children are
written in (z, id) order, attributes in a fixed order, coordinates with
exactly two decimals.  Parsing recovers z from document order, which is all
that paint order needs, so emit(parse(emit(ir))) == emit(ir).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from . import palette
from .errors import ClawCanvasError
from .ir import ANCHOR, FONT_PX, CanvasIR, CanvasNode

SVG_NS = "http://www.w3.org/2000/svg"
_ANCHOR_INV = {v: k for k, v in ANCHOR.items()}
_FONT_INV = {str(v): k for k, v in FONT_PX.items()}


class SvgError(ClawCanvasError):
    pass


class UnsupportedElement(SvgError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unsupported element <{name}>")


class MalformedAttribute(SvgError):
    def __init__(self, node_id: str | None, attr: str):
        self.node_id = node_id
        self.attr = attr
        super().__init__(f"node {node_id!r}: missing or malformed attribute {attr!r}")


class MalformedDocument(SvgError):
    pass


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _attr(v: str) -> str:
    return (
        v.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("\n", "&#10;")
        .replace("\r", "&#13;")
        .replace("\t", "&#9;")
    )


def _text(v: str) -> str:
    return v.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _node_lines(n: CanvasNode, depth: int) -> list[str]:
    pad = "  " * depth
    attrs = [("id", n.id)]
    if n.label is not None:
        attrs.append(("data-label", n.label))
    if n.kind == "rect":
        x, y, w, h = n.bbox
        attrs += [("x", _f(x)), ("y", _f(y)), ("width", _f(w)), ("height", _f(h))]
    elif n.kind == "ellipse":
        x, y, w, h = n.bbox
        attrs += [("cx", _f(x + w / 2)), ("cy", _f(y + h / 2)), ("rx", _f(w / 2)), ("ry", _f(h / 2))]
    elif n.kind == "polygon":
        attrs.append(("points", " ".join(f"{_f(px)},{_f(py)}" for px, py in n.points)))
    elif n.kind == "text":
        attrs += [("x", _f(n.anchor[0])), ("y", _f(n.anchor[1]))]
    if n.color is not None:
        attrs.append(("fill", palette.to_hex(n.color)))
    if n.kind == "text":
        attrs.append(("font-size", str(FONT_PX[n.size_class])))
        attrs.append(("text-anchor", ANCHOR[n.alignment]))
    head = pad + "<" + ("g" if n.kind == "group" else n.kind) + "".join(f' {k}="{_attr(v)}"' for k, v in attrs)
    if n.kind == "text":
        return [head + ">" + _text(n.content) + "</text>"]
    if n.kind == "group":
        if not n.children:
            return [head + "/>"]
        lines = [head + ">"]
        for c in sorted(n.children, key=lambda c: (c.z, c.id)):
            lines.extend(_node_lines(c, depth + 1))
        return lines + [pad + "</g>"]
    return [head + "/>"]


def emit_svg(ir: CanvasIR) -> bytes:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" width="{ir.width}" height="{ir.height}" viewBox="0 0 {ir.width} {ir.height}">',
    ]
    for n in ir.nodes:
        lines.extend(_node_lines(n, 1))
    lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("utf-8")


# --- parsing ---------------------------------------------------------------

_ALLOWED = {
    "rect": {"id", "data-label", "x", "y", "width", "height", "fill"},
    "ellipse": {"id", "data-label", "cx", "cy", "rx", "ry", "fill"},
    "polygon": {"id", "data-label", "points", "fill"},
    "text": {"id", "data-label", "x", "y", "fill", "font-size", "text-anchor"},
    "g": {"id", "data-label", "fill"},
}


def _local(tag: str) -> str:
    if tag.startswith("{"):
        ns, _, name = tag[1:].partition("}")
        if ns != SVG_NS:
            raise UnsupportedElement(name)
        return name
    return tag


def _num(el, node_id, attr) -> float:
    raw = el.get(attr)
    if raw is None:
        raise MalformedAttribute(node_id, attr)
    try:
        v = float(raw)
    except ValueError:
        raise MalformedAttribute(node_id, attr) from None
    if v != v or v in (float("inf"), float("-inf")):
        raise MalformedAttribute(node_id, attr)
    return v


def _parse_el(el, z: int) -> CanvasNode:
    name = _local(el.tag)
    if name not in _ALLOWED:
        raise UnsupportedElement(name)
    node_id = el.get("id")
    if not node_id:
        raise MalformedAttribute(None, "id")
    for a in el.attrib:
        if a not in _ALLOWED[name]:
            raise MalformedAttribute(node_id, a)
    color = None
    if el.get("fill") is not None:
        color = palette.from_hex(el.get("fill"))
        if color is None:
            raise MalformedAttribute(node_id, "fill")
    label = el.get("data-label")
    if name != "text" and name != "g" and (el.text or "").strip():
        raise MalformedAttribute(node_id, "#text")
    if name == "rect":
        x, y = _num(el, node_id, "x"), _num(el, node_id, "y")
        w, h = _num(el, node_id, "width"), _num(el, node_id, "height")
        if w <= 0 or h <= 0:
            raise MalformedAttribute(node_id, "width" if w <= 0 else "height")
        node = CanvasNode(node_id, "rect", z, label, color, (x, y, w, h))
    elif name == "ellipse":
        cx, cy = _num(el, node_id, "cx"), _num(el, node_id, "cy")
        rx, ry = _num(el, node_id, "rx"), _num(el, node_id, "ry")
        if rx <= 0 or ry <= 0:
            raise MalformedAttribute(node_id, "rx" if rx <= 0 else "ry")
        node = CanvasNode(node_id, "ellipse", z, label, color, (cx - rx, cy - ry, 2 * rx, 2 * ry))
    elif name == "polygon":
        raw = el.get("points")
        if raw is None:
            raise MalformedAttribute(node_id, "points")
        try:
            pts = tuple(tuple(float(c) for c in pair.split(",")) for pair in raw.split())
        except ValueError:
            raise MalformedAttribute(node_id, "points") from None
        if len(pts) < 3 or any(len(p) != 2 for p in pts):
            raise MalformedAttribute(node_id, "points")
        node = CanvasNode(node_id, "polygon", z, label, color, points=pts)
    elif name == "text":
        if len(el):
            raise UnsupportedElement(_local(el[0].tag))
        size = _FONT_INV.get(el.get("font-size"))
        if size is None:
            raise MalformedAttribute(node_id, "font-size")
        align = _ANCHOR_INV.get(el.get("text-anchor"))
        if align is None:
            raise MalformedAttribute(node_id, "text-anchor")
        if not el.text:
            raise MalformedAttribute(node_id, "#text")
        anchor = (_num(el, node_id, "x"), _num(el, node_id, "y"))
        node = CanvasNode(node_id, "text", z, label, color, anchor=anchor, size_class=size, alignment=align, content=el.text)
    else:
        children = tuple(_parse_el(c, k) for k, c in enumerate(el))
        node = CanvasNode(node_id, "group", z, label, color, children=children)
    return node


def parse_svg_subset(data: bytes | str) -> CanvasIR:
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedDocument(f"not well-formed XML: {exc}") from None
    if _local(root.tag) != "svg":
        raise UnsupportedElement(_local(root.tag))
    try:
        width, height = int(root.get("width", "")), int(root.get("height", ""))
    except ValueError:
        raise MalformedAttribute("svg", "width/height") from None
    if width <= 0 or height <= 0:
        raise MalformedAttribute("svg", "width/height")
    nodes = tuple(_parse_el(el, z) for z, el in enumerate(root))
    ids = [n.id for n in CanvasIR(width, height, nodes).walk()]
    if len(set(ids)) != len(ids):
        raise MalformedDocument("duplicate node ids")
    return CanvasIR(width, height, nodes)


def svg_texts(data: bytes | str) -> list[str]:
    """Text contents in document order."""
    ir = parse_svg_subset(data)
    out = []

    def visit(nodes):
        for n in nodes:
            if n.kind == "text":
                out.append(n.content)
            visit(n.children)

    visit(ir.nodes)
    return out
