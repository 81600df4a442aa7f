"""Closed-form physical drafts and the canvas annotations built from them.

World coordinates are metres with y up; pixels have y down.  The caller
supplies the mapping (``WorldFrame``) so no unit is ever guessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ClawCanvasError
from .ir import CanvasIR, CanvasNode, GeometryOverflow, check_ir

JET_SAMPLES = 32


class PhysicsError(ClawCanvasError):
    pass


class DegenerateLine(PhysicsError):
    pass


class NonpositiveStiffness(PhysicsError):
    pass


class InvalidGeometry(PhysicsError):
    pass


class NonpositiveDensity(PhysicsError):
    pass


@dataclass(frozen=True)
class PhysicsConfig:
    g: float = 9.81

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")


def mirror_reflect(p: tuple[float, float], point: tuple[float, float], direction: tuple[float, float]) -> tuple[float, float]:
    """Reflect ``p`` across the line through ``point`` along ``direction``."""
    dx, dy = direction
    norm = math.hypot(dx, dy)
    if norm == 0 or not math.isfinite(norm):
        raise DegenerateLine("mirror direction must be a non-zero vector")
    ux, uy = dx / norm, dy / norm
    vx, vy = p[0] - point[0], p[1] - point[1]
    t = vx * ux + vy * uy
    fx, fy = point[0] + t * ux, point[1] + t * uy
    return (2 * fx - p[0], 2 * fy - p[1])


def spring_extension(force: float, stiffness: float) -> float:
    if not stiffness > 0:
        raise NonpositiveStiffness(f"stiffness must be positive, got {stiffness}")
    return force / stiffness


def _check_jet(H: float, h: float) -> None:
    if not (0 <= h < H):
        raise InvalidGeometry(f"need 0 <= hole height < surface height, got h={h}, H={H}")


def jet_range(H: float, h: float, config: PhysicsConfig | None = None) -> float:
    """Horizontal reach of a jet leaving a hole at height h below a surface at H.

    Efflux speed sqrt(2g(H-h)) times fall time sqrt(2h/g); g cancels.
    """
    _check_jet(H, h)
    return 2.0 * math.sqrt(h * (H - h))


def jet_trajectory(H: float, h: float, config: PhysicsConfig | None = None, samples: int = JET_SAMPLES):
    """`samples` points (x, y) from the hole to the ground, evenly spaced in time."""
    _check_jet(H, h)
    g = (config or PhysicsConfig()).g
    v = math.sqrt(2 * g * (H - h))
    t_fall = math.sqrt(2 * h / g)
    pts = []
    for k in range(samples):
        t = t_fall * k / (samples - 1)
        pts.append((v * t, h - 0.5 * g * t * t))
    pts[-1] = (jet_range(H, h), 0.0)
    return pts


def buoyant_fraction(rho_object: float, rho_fluid: float) -> tuple[float, bool]:
    """Submerged volume fraction and whether the body floats."""
    if not (rho_object > 0 and rho_fluid > 0):
        raise NonpositiveDensity("densities must be positive")
    if rho_object <= rho_fluid:
        return rho_object / rho_fluid, True
    return 1.0, False


# --- annotations ----------------------------------------------------------------


@dataclass(frozen=True)
class WorldFrame:
    scale: float  # pixels per metre
    origin: tuple[float, float]  # pixel position of the world origin

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def to_px(self, p: tuple[float, float]) -> tuple[float, float]:
        return (self.origin[0] + self.scale * p[0], self.origin[1] - self.scale * p[1])


@dataclass(frozen=True)
class ReflectionPair:
    source_id: str
    mirror_point: tuple[float, float]  # pixels
    mirror_direction: tuple[float, float]


@dataclass(frozen=True)
class SpringAnnotation:
    anchor: tuple[float, float]  # world, top of the spring
    natural_length: float
    extension: float
    width: float = 0.1
    id: str = "spring"


@dataclass(frozen=True)
class JetArc:
    surface_height: float
    hole_height: float
    hole_position: tuple[float, float] = (0.0, 0.0)  # world x of the wall, world y of the ground
    id: str = "jet"


@dataclass(frozen=True)
class Waterline:
    body_id: str
    rho_object: float
    rho_fluid: float


def _q(v: float) -> float:
    return round(v, 2)


def _reflect_node(n: CanvasNode, ann: ReflectionPair) -> CanvasNode:
    def refl(p):
        return mirror_reflect(p, ann.mirror_point, ann.mirror_direction)

    nid = n.id + ":reflection"
    label = (n.label or n.id) + ":reflection"
    if n.kind == "polygon":
        pts = tuple((_q(x), _q(y)) for x, y in (refl(p) for p in n.points))
        return CanvasNode(nid, "polygon", n.z, label, n.color, points=pts)
    if n.kind == "text":
        ax, ay = refl(n.anchor)
        return replace(n, id=nid, label=label, anchor=(_q(ax), _q(ay)))
    cx, cy = refl(n.center())
    x, y, w, h = n.bounds()
    return CanvasNode(nid, n.kind if n.kind in ("rect", "ellipse") else "rect", n.z, label, n.color, (_q(cx - w / 2), _q(cy - h / 2), w, h))


def annotation_nodes(ir: CanvasIR, annotation, frame: WorldFrame | None = None, config: PhysicsConfig | None = None) -> list[CanvasNode]:
    top = max((n.z for n in ir.nodes), default=0) + 1
    if isinstance(annotation, ReflectionPair):
        return [_reflect_node(ir.find(annotation.source_id), annotation)]
    if isinstance(annotation, Waterline):
        body = ir.find(annotation.body_id)
        frac, floats = buoyant_fraction(annotation.rho_object, annotation.rho_fluid)
        x, y, w, h = body.bounds()
        level = y + h - frac * h
        label = "waterline:floats" if floats else "waterline:sinks"
        return [CanvasNode(f"{annotation.body_id}:waterline", "rect", top, label, "blue", (x, _q(max(level - 1, 0.0)), w, 2.0))]
    if frame is None:
        raise ValueError("world-space annotations need a WorldFrame")
    if isinstance(annotation, SpringAnnotation):
        ax, ay = annotation.anchor
        half = annotation.width / 2
        rest = annotation.natural_length
        end = rest + annotation.extension
        if end <= 0:
            raise InvalidGeometry("spring length must stay positive")

        def rect(nid, label, y_top, y_bottom):
            (x0, y0), (x1, y1) = frame.to_px((ax - half, y_top)), frame.to_px((ax + half, y_bottom))
            return CanvasNode(nid, "rect", top, label, None, (_q(x0), _q(y0), max(_q(x1 - x0), 0.01), max(_q(y1 - y0), 0.01)))

        marker = 1.0 / frame.scale
        return [
            rect(f"{annotation.id}:body", "spring:body", ay, ay - end),
            rect(f"{annotation.id}:rest", "spring:rest", ay - rest, ay - rest - marker),
        ]
    if isinstance(annotation, JetArc):
        wx, gy = annotation.hole_position
        pts = jet_trajectory(annotation.surface_height, annotation.hole_height, config)
        px = tuple(tuple(_q(v) for v in frame.to_px((wx + x, gy + y))) for x, y in pts)
        return [CanvasNode(f"{annotation.id}:arc", "polygon", top, "jet:arc", None, points=px)]
    raise TypeError(f"unknown annotation {type(annotation).__name__}")


def annotate_sketch(ir: CanvasIR, annotation, frame: WorldFrame | None = None, config: PhysicsConfig | None = None) -> CanvasIR:
    """Add annotation nodes; existing nodes are carried over untouched."""
    added = annotation_nodes(ir, annotation, frame, config)
    existing = {n.id for n in ir.walk()}
    for n in added:
        if n.id in existing:
            raise ValueError(f"annotation id {n.id!r} already present")
    for n in added:
        if check_ir(CanvasIR(ir.width, ir.height, (n,))):
            raise GeometryOverflow(n.id)
    return ir.with_nodes(list(ir.nodes) + added)


def annotation_from_dict(d: dict):
    """(annotation, frame or None) from a JSON request such as
    ``{"type": "jet", "H": 1.0, "h": 0.5, "scale": 200, "origin": [100, 900]}``."""
    kind = d.get("type")

    def frame():
        if "scale" not in d or "origin" not in d:
            raise ValueError(f"{kind} annotation needs scale and origin")
        return WorldFrame(float(d["scale"]), (float(d["origin"][0]), float(d["origin"][1])))

    if kind == "reflection":
        return ReflectionPair(d["source"], tuple(map(float, d["point"])), tuple(map(float, d["direction"]))), None
    if kind == "spring":
        ext = spring_extension(float(d.get("force", 0.0)), float(d["stiffness"]))
        ann = SpringAnnotation(tuple(map(float, d.get("anchor", (0.0, 0.0)))), float(d["natural_length"]), ext, float(d.get("width", 0.1)))
        return ann, frame()
    if kind == "jet":
        return JetArc(float(d["H"]), float(d["h"]), tuple(map(float, d.get("hole_position", (0.0, 0.0))))), frame()
    if kind == "waterline":
        return Waterline(d["body"], float(d["rho_object"]), float(d["rho_fluid"])), None
    raise ValueError(f"unknown annotation type {kind!r}")
