"""Layer documents and their ``*.layers.jsonl`` form.

The first line is a header, ``{"kind": "layerdoc", "width": W, "height": H}``;
each further line is one layer, back to front, with strictly increasing z.
Payloads and masks are referenced by paths relative to the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ClawCanvasError
from ..jsonutil import dumps_line
from .image import Image, Mask, save_image, save_mask

ORIGINS = ("decomposed", "compiled_sketch", "generated", "edited")


class LayerDocError(ClawCanvasError):
    pass


class MalformedLayerLine(LayerDocError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class MissingHeader(MalformedLayerLine):
    def __init__(self):
        super().__init__(1, "first line must be the layerdoc header")


class DuplicateLayerId(LayerDocError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"duplicate layer id {id!r}")


class NonMonotoneZ(LayerDocError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"layer {id!r}: z must be strictly greater than the previous layer's")


@dataclass(frozen=True)
class SolidFill:
    """A constant RGBA payload; ``size`` of None means the whole canvas."""

    rgba: tuple[int, int, int, int]
    size: tuple[int, int] | None = None

    def __post_init__(self):
        if len(self.rgba) != 4 or any(not (0 <= int(c) <= 255) for c in self.rgba):
            raise ValueError(f"rgba must be four 0..255 values, got {self.rgba}")
        object.__setattr__(self, "rgba", tuple(int(c) for c in self.rgba))
        if self.size is not None:
            object.__setattr__(self, "size", (int(self.size[0]), int(self.size[1])))


Payload = str | SolidFill | Image


@dataclass(frozen=True)
class Layer:
    id: str
    z: int
    payload: Payload
    name: str = ""
    opacity: float = 1.0
    offset: tuple[int, int] = (0, 0)
    mask: str | Mask | None = None
    origin: str = "decomposed"

    def __post_init__(self):
        if not (0.0 <= self.opacity <= 1.0):
            raise ValueError(f"layer {self.id!r}: opacity {self.opacity} outside [0, 1]")
        if self.origin not in ORIGINS:
            raise ValueError(f"layer {self.id!r}: unknown origin {self.origin!r}")
        object.__setattr__(self, "offset", (int(self.offset[0]), int(self.offset[1])))


@dataclass(frozen=True)
class LayerDoc:
    width: int
    height: int
    layers: tuple[Layer, ...] = ()
    base_dir: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.width <= 0 or self.height <= 0:
            raise ValueError("canvas dimensions must be positive")
        check_layers(self.layers)

    def layer(self, id: str) -> Layer:
        for ly in self.layers:
            if ly.id == id:
                return ly
        raise KeyError(id)

    def with_layers(self, layers) -> "LayerDoc":
        return LayerDoc(self.width, self.height, tuple(layers), self.base_dir)


def check_layers(layers) -> None:
    seen = set()
    prev = None
    for ly in layers:
        if ly.id in seen:
            raise DuplicateLayerId(ly.id)
        seen.add(ly.id)
        if prev is not None and ly.z <= prev:
            raise NonMonotoneZ(ly.id)
        prev = ly.z


# --- parsing -----------------------------------------------------------------


def _int_pair(v, line_no, key):
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, int) and not isinstance(c, bool) for c in v)):
        raise MalformedLayerLine(line_no, f"{key} must be a pair of integers")
    return (v[0], v[1])


def _parse_payload(v, line_no):
    if isinstance(v, dict) and set(v) == {"path"} and isinstance(v["path"], str) and v["path"]:
        return v["path"]
    if isinstance(v, dict) and "solid" in v and set(v) <= {"solid", "size"}:
        rgba = v["solid"]
        if not (isinstance(rgba, list) and len(rgba) == 4 and all(isinstance(c, int) and 0 <= c <= 255 for c in rgba)):
            raise MalformedLayerLine(line_no, "solid must be four integers in 0..255")
        size = v.get("size")
        if size is not None:
            size = _int_pair(size, line_no, "size")
            if size[0] <= 0 or size[1] <= 0:
                raise MalformedLayerLine(line_no, "size must be positive")
        return SolidFill(tuple(rgba), size)
    raise MalformedLayerLine(line_no, 'payload must be {"path": ...} or {"solid": [r, g, b, a]}')


def _parse_layer(d: dict, line_no: int) -> Layer:
    d = dict(d)
    d.pop("kind")
    lid = d.pop("id", None)
    if not isinstance(lid, str) or not lid:
        raise MalformedLayerLine(line_no, "id must be a non-empty string")
    z = d.pop("z", None)
    if not isinstance(z, int) or isinstance(z, bool):
        raise MalformedLayerLine(line_no, "z must be an integer")
    if "payload" not in d:
        raise MalformedLayerLine(line_no, "payload is required")
    payload = _parse_payload(d.pop("payload"), line_no)
    name = d.pop("name", "")
    if not isinstance(name, str):
        raise MalformedLayerLine(line_no, "name must be a string")
    opacity = d.pop("opacity", 1.0)
    if not isinstance(opacity, (int, float)) or isinstance(opacity, bool) or not (0.0 <= opacity <= 1.0):
        raise MalformedLayerLine(line_no, "opacity must be a number in [0, 1]")
    offset = _int_pair(d.pop("offset", [0, 0]), line_no, "offset")
    mask = d.pop("mask", None)
    if mask is not None and (not isinstance(mask, str) or not mask):
        raise MalformedLayerLine(line_no, "mask must be a path or null")
    origin = d.pop("origin", "decomposed")
    if origin not in ORIGINS:
        raise MalformedLayerLine(line_no, f"origin must be one of {', '.join(ORIGINS)}")
    if d:
        raise MalformedLayerLine(line_no, f"unknown fields: {', '.join(sorted(d))}")
    return Layer(lid, z, payload, name, float(opacity), offset, mask, origin)


def parse_layerdoc(data: bytes | str, base_dir: str | Path | None = None) -> LayerDoc:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedLayerLine(1, "not UTF-8") from None
    rows = []
    for line_no, line in enumerate(data.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLayerLine(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(d, dict):
            raise MalformedLayerLine(line_no, "expected a JSON object")
        rows.append((line_no, d))
    if not rows or rows[0][1].get("kind") != "layerdoc":
        raise MissingHeader()
    line_no, head = rows[0]
    w, h = head.get("width"), head.get("height")
    if not all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in (w, h)):
        raise MalformedLayerLine(line_no, "width and height must be positive integers")
    if set(head) - {"kind", "width", "height"}:
        raise MalformedLayerLine(line_no, f"unknown header fields: {', '.join(sorted(set(head) - {'kind', 'width', 'height'}))}")
    layers = []
    for line_no, d in rows[1:]:
        kind = d.get("kind")
        if kind == "layerdoc":
            raise MalformedLayerLine(line_no, "second header")
        if kind != "layer":
            raise MalformedLayerLine(line_no, f"unknown kind {kind!r}")
        layers.append(_parse_layer(d, line_no))
    check_layers(layers)
    return LayerDoc(w, h, tuple(layers), Path(base_dir) if base_dir is not None else None)


def load_layerdoc(path: str | Path) -> LayerDoc:
    path = Path(path)
    return parse_layerdoc(path.read_bytes(), path.parent)


# --- serialization -------------------------------------------------------------


def _payload_json(ly: Layer, directory: Path | None):
    p = ly.payload
    if isinstance(p, str):
        return {"path": p}
    if isinstance(p, SolidFill):
        out = {"solid": list(p.rgba)}
        if p.size is not None:
            out["size"] = list(p.size)
        return out
    if directory is None:
        raise ValueError(f"layer {ly.id!r} has an in-memory payload; pass a directory to write it")
    rel = f"{ly.id}.png"
    save_image(p, directory / rel)
    return {"path": rel}


def _mask_json(ly: Layer, directory: Path | None):
    m = ly.mask
    if m is None or isinstance(m, str):
        return m
    if directory is None:
        raise ValueError(f"layer {ly.id!r} has an in-memory mask; pass a directory to write it")
    rel = f"{ly.id}.mask.png"
    save_mask(m, directory / rel)
    return rel


def serialize_layerdoc(doc: LayerDoc, directory: str | Path | None = None) -> bytes:
    """JSONL bytes; in-memory payloads and masks are written as PNGs into ``directory``."""
    directory = Path(directory) if directory is not None else None
    lines = [dumps_line({"height": doc.height, "kind": "layerdoc", "width": doc.width})]
    for ly in doc.layers:
        lines.append(
            dumps_line(
                {
                    "id": ly.id,
                    "kind": "layer",
                    "mask": _mask_json(ly, directory),
                    "name": ly.name,
                    "offset": list(ly.offset),
                    "opacity": ly.opacity,
                    "origin": ly.origin,
                    "payload": _payload_json(ly, directory),
                    "z": ly.z,
                }
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")
