"""Integer alpha-over compositing, layer edits and the unedited-region mask.

All blending is un-premultiplied 8-bit with round-half-up on non-negative
integers, so results are bit-exact and independent of float behaviour:

    op8   = round(opacity * 255)            (on the shortest decimal form of opacity)
    SA    = round(A * op8 / 255)            (0 outside the layer mask)
    num   = SA * 255 + DA * (255 - SA)
    out_a = round(num / 255)
    out_c = round((sc * SA * 255 + dc * DA * (255 - SA)) / num)
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import ROUND_FLOOR, Decimal
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .. import palette
from ..errors import ClawCanvasError
from .doc import Layer, LayerDoc, SolidFill
from .image import Image, ImageFormatError, load_image, load_mask


class CompositeError(ClawCanvasError):
    pass


class MissingPayload(CompositeError):
    def __init__(self, id: str, detail: str = ""):
        self.id = id
        super().__init__(f"layer {id!r}: payload not loadable" + (f" ({detail})" if detail else ""))


class DimensionMismatch(CompositeError):
    def __init__(self, id: str, detail: str = ""):
        self.id = id
        super().__init__(f"{id}: dimension mismatch" + (f" ({detail})" if detail else ""))


class UnknownLayer(CompositeError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"no layer with id {id!r}")


class OutOfRange(CompositeError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"opacity {value} outside [0, 1]")


def _div_round(num, den):
    """round(num / den), halves up, for non-negative integer arrays."""
    return (2 * num + den) // (2 * den)


def opacity8(opacity: float) -> int:
    # decimal, so 0.7 quantizes to 179 as written rather than via its binary approximation
    return int((Decimal(repr(float(opacity))) * 255 + Decimal("0.5")).to_integral_value(rounding=ROUND_FLOOR))


# --- payload resolution ----------------------------------------------------------


def _resolve_path(doc: LayerDoc, ref: str) -> Path:
    p = Path(ref)
    if not p.is_absolute() and doc.base_dir is not None:
        p = doc.base_dir / p
    return p


def layer_pixels(doc: LayerDoc, ly: Layer) -> np.ndarray:
    p = ly.payload
    if isinstance(p, Image):
        return p.rgba
    if isinstance(p, SolidFill):
        w, h = p.size if p.size is not None else (doc.width, doc.height)
        arr = np.empty((h, w, 4), dtype=np.uint8)
        arr[:] = p.rgba
        return arr
    try:
        return load_image(_resolve_path(doc, p)).rgba
    except (OSError, ImageFormatError) as exc:
        raise MissingPayload(ly.id, str(exc)) from None


def layer_mask(doc: LayerDoc, ly: Layer, shape: tuple[int, int]) -> np.ndarray | None:
    m = ly.mask
    if m is None:
        return None
    if isinstance(m, str):
        try:
            m = load_mask(_resolve_path(doc, m))
        except (OSError, ImageFormatError) as exc:
            raise MissingPayload(ly.id, f"mask: {exc}") from None
    if m.bits.shape != shape:
        raise DimensionMismatch(ly.id, f"mask {m.width}x{m.height} vs payload {shape[1]}x{shape[0]}")
    return m.bits


def _window(doc: LayerDoc, ly: Layer, h: int, w: int):
    """Canvas and layer-local slices of the visible part of a layer, or None."""
    dx, dy = ly.offset
    x0, y0 = max(dx, 0), max(dy, 0)
    x1, y1 = min(dx + w, doc.width), min(dy + h, doc.height)
    if x0 >= x1 or y0 >= y1:
        return None
    return (slice(y0, y1), slice(x0, x1)), (slice(y0 - dy, y1 - dy), slice(x0 - dx, x1 - dx))


def footprint(doc: LayerDoc, ly: Layer) -> np.ndarray:
    """Canvas pixels the layer can touch: offset bbox intersected with mask support."""
    out = np.zeros((doc.height, doc.width), dtype=bool)
    px = layer_pixels(doc, ly)
    h, w = px.shape[:2]
    mask = layer_mask(doc, ly, (h, w))
    win = _window(doc, ly, h, w)
    if win is None:
        return out
    canvas, local = win
    out[canvas] = True if mask is None else mask[local]
    return out


# --- compositing -----------------------------------------------------------------


def over(dst: np.ndarray, src: np.ndarray, sa: np.ndarray) -> np.ndarray:
    """Blend ``src`` (colour channels, alpha ``sa``) over ``dst`` in place-free fashion.

    ``dst`` and ``src`` are (..., 4) int64 arrays; ``sa`` is the effective source alpha.
    """
    da = dst[..., 3]
    inv = 255 - sa
    num = sa * 255 + da * inv
    out = np.zeros_like(dst)
    nz = num > 0
    out[..., 3] = _div_round(num, 255)
    for c in range(3):
        cnum = src[..., c] * sa * 255 + dst[..., c] * da * inv
        out[..., c] = np.where(nz, _div_round(cnum, np.where(nz, num, 1)), 0)
    return out


def composite(doc: LayerDoc) -> Image:
    acc = np.zeros((doc.height, doc.width, 4), dtype=np.int64)
    for ly in sorted(doc.layers, key=lambda ly: ly.z):
        px = layer_pixels(doc, ly)
        h, w = px.shape[:2]
        mask = layer_mask(doc, ly, (h, w))
        op8 = opacity8(ly.opacity)
        win = _window(doc, ly, h, w)
        if win is None or op8 == 0:
            continue
        canvas, local = win
        src = px[local].astype(np.int64)
        sa = _div_round(src[..., 3] * op8, 255)
        if mask is not None:
            sa = np.where(mask[local], sa, 0)
        acc[canvas] = over(acc[canvas], src, sa)
    return Image(acc.astype(np.uint8))


# --- edits -----------------------------------------------------------------------


@dataclass(frozen=True)
class Translate:
    layer_id: str
    dx: int
    dy: int


@dataclass(frozen=True)
class SetOpacity:
    layer_id: str
    value: float


@dataclass(frozen=True)
class Recolor:
    """Either rotate hue by ``hue_rotation`` degrees or paint with a palette ``target``."""

    layer_id: str
    hue_rotation: float | None = None
    target: str | None = None

    def __post_init__(self):
        if (self.hue_rotation is None) == (self.target is None):
            raise ValueError("Recolor needs exactly one of hue_rotation and target")
        if self.target is not None and not palette.is_color(self.target):
            raise ValueError(f"unknown palette color {self.target!r}")


@dataclass(frozen=True)
class Delete:
    layer_id: str


@dataclass(frozen=True)
class Reorder:
    layer_id: str
    new_z: int


@dataclass(frozen=True)
class ReplacePayload:
    layer_id: str
    payload: str | SolidFill | Image


EditOp = Translate | SetOpacity | Recolor | Delete | Reorder | ReplacePayload


def _recolor_rgba(rgba: np.ndarray, op: Recolor) -> np.ndarray:
    out = np.array(rgba, dtype=np.uint8, copy=True)
    if op.target is not None:
        out[..., :3] = palette.rgb(op.target)
        return out
    shift = int(round(op.hue_rotation / 360.0 * 256)) % 256
    hsv = np.array(PILImage.fromarray(np.ascontiguousarray(out[..., :3]), "RGB").convert("HSV"))
    hsv[..., 0] = (hsv[..., 0].astype(np.int64) + shift) % 256
    out[..., :3] = np.array(PILImage.fromarray(hsv, "HSV").convert("RGB"))
    return out


def _recolored(doc: LayerDoc, ly: Layer, op: Recolor) -> Layer:
    p = ly.payload
    if isinstance(p, SolidFill):
        px = np.array([[p.rgba]], dtype=np.uint8)
        return replace(ly, payload=SolidFill(tuple(int(c) for c in _recolor_rgba(px, op)[0, 0]), p.size), origin="edited")
    return replace(ly, payload=Image(_recolor_rgba(layer_pixels(doc, ly), op)), origin="edited")


def _reorder(layers: list[Layer], idx: int, new_z: int) -> list[Layer]:
    target = replace(layers[idx], z=new_z)
    rest = [ly for k, ly in enumerate(layers) if k != idx]
    if all(ly.z != new_z for ly in rest):
        return sorted(rest + [target], key=lambda ly: ly.z)
    # collision: the target takes new_z, layers at or above it move up just enough
    out = [ly for ly in rest if ly.z < new_z] + [target]
    floor = new_z
    for ly in (ly for ly in rest if ly.z >= new_z):
        floor = max(floor + 1, ly.z)
        out.append(ly if ly.z == floor else replace(ly, z=floor))
    return out


def _find(doc: LayerDoc, layer_id: str) -> int:
    for k, ly in enumerate(doc.layers):
        if ly.id == layer_id:
            return k
    raise UnknownLayer(layer_id)


def apply_edit(doc: LayerDoc, op: EditOp) -> LayerDoc:
    idx = _find(doc, op.layer_id)
    layers = list(doc.layers)
    ly = layers[idx]
    if isinstance(op, Translate):
        layers[idx] = replace(ly, offset=(ly.offset[0] + int(op.dx), ly.offset[1] + int(op.dy)))
    elif isinstance(op, SetOpacity):
        if not (0.0 <= op.value <= 1.0):
            raise OutOfRange(op.value)
        layers[idx] = replace(ly, opacity=float(op.value))
    elif isinstance(op, Recolor):
        layers[idx] = _recolored(doc, ly, op)
    elif isinstance(op, Delete):
        del layers[idx]
    elif isinstance(op, Reorder):
        layers = _reorder(layers, idx, int(op.new_z))
    elif isinstance(op, ReplacePayload):
        layers[idx] = replace(ly, payload=op.payload, origin="edited")
    else:
        raise TypeError(f"unknown edit {type(op).__name__}")
    return doc.with_layers(layers)


def unedited_mask(before: LayerDoc, op: EditOp) -> np.ndarray:
    """Pixels whose composited value the edit provably cannot change."""
    after = apply_edit(before, op)
    touched = footprint(before, before.layer(op.layer_id))
    if not isinstance(op, Delete):
        touched |= footprint(after, after.layer(op.layer_id))
    return ~touched


def edit_from_json(d: dict) -> EditOp:
    """Build an edit from ``{"op": "translate", "layer": id, ...}``."""
    kind = d.get("op")
    lid = d.get("layer")
    if not isinstance(lid, str):
        raise ValueError("edit needs a string 'layer'")
    if kind == "translate":
        return Translate(lid, int(d.get("dx", 0)), int(d.get("dy", 0)))
    if kind == "set_opacity":
        return SetOpacity(lid, float(d["value"]))
    if kind == "recolor":
        return Recolor(lid, d.get("hue_rotation"), d.get("target"))
    if kind == "delete":
        return Delete(lid)
    if kind == "reorder":
        return Reorder(lid, int(d["new_z"]))
    if kind == "replace_payload":
        payload = d["payload"]
        if isinstance(payload, dict) and "solid" in payload:
            return ReplacePayload(lid, SolidFill(tuple(payload["solid"]), tuple(payload["size"]) if payload.get("size") else None))
        if isinstance(payload, dict) and "path" in payload:
            return ReplacePayload(lid, payload["path"])
        raise ValueError("replace_payload needs a {path} or {solid} payload")
    raise ValueError(f"unknown edit op {kind!r}")

