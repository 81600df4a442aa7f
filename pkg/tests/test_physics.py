import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clawcanvas.ir import CanvasIR, CanvasNode, GeometryOverflow
from clawcanvas.physics import (
    DegenerateLine,
    InvalidGeometry,
    JetArc,
    NonpositiveDensity,
    NonpositiveStiffness,
    PhysicsConfig,
    ReflectionPair,
    SpringAnnotation,
    Waterline,
    WorldFrame,
    annotate_sketch,
    annotation_from_dict,
    buoyant_fraction,
    jet_range,
    jet_trajectory,
    mirror_reflect,
    spring_extension,
)
from clawcanvas.svg import emit_svg
from clawcanvas.verify import diff_canvases

from oracles import projectile_range

finite = st.floats(-1e3, 1e3, allow_nan=False)


def line_distance(p, point, direction):
    ux, uy = direction[0] / math.hypot(*direction), direction[1] / math.hypot(*direction)
    return (p[0] - point[0]) * uy - (p[1] - point[1]) * ux


def test_axis_reflection():
    assert mirror_reflect((3, 2), (0, 0), (0, 1)) == (-3, 2)


def test_point_on_mirror_is_fixed():
    assert mirror_reflect((2, 2), (0, 0), (1, 1)) == pytest.approx((2, 2), abs=1e-12)


def test_degenerate_mirror():
    with pytest.raises(DegenerateLine):
        mirror_reflect((1, 1), (0, 0), (0, 0))


@settings(max_examples=300)
@given(finite, finite, finite, finite, finite, finite)
def test_reflection_is_involution_and_keeps_distance(px, py, mx, my, dx, dy):
    if math.hypot(dx, dy) < 1e-3:
        dx, dy = 1.0, 0.0
    p = (px, py)
    q = mirror_reflect(p, (mx, my), (dx, dy))
    back = mirror_reflect(q, (mx, my), (dx, dy))
    scale = max(1.0, abs(px), abs(py), abs(mx), abs(my))
    assert back == pytest.approx(p, abs=1e-12 * scale * 16)
    d0, d1 = line_distance(p, (mx, my), (dx, dy)), line_distance(q, (mx, my), (dx, dy))
    assert abs(abs(d0) - abs(d1)) <= 1e-12 * scale * 16


def test_spring():
    assert spring_extension(10, 200) == pytest.approx(0.05)
    assert spring_extension(0, 200) == 0
    with pytest.raises(NonpositiveStiffness):
        spring_extension(10, 0)


def test_jet_range_closed_form_and_integrator():
    assert abs(jet_range(1.0, 0.5) - 1.0) <= 1e-9
    assert abs(jet_range(1.0, 0.5) - projectile_range(1.0, 0.5)) <= 1e-4
    assert jet_range(1.0, 0.0) == 0


@pytest.mark.parametrize("H, h", [(2.0, 0.3), (0.8, 0.6), (5.0, 1.0)])
def test_jet_range_against_integrator(H, h):
    assert jet_range(H, h) == pytest.approx(projectile_range(H, h), abs=1e-4)


def test_jet_range_independent_of_g():
    vals = {jet_range(1.3, 0.4, PhysicsConfig(g)) for g in (1.0, 9.81, 25.0)}
    assert len(vals) == 1
    assert projectile_range(1.3, 0.4, g=1.0) == pytest.approx(projectile_range(1.3, 0.4, g=25.0), abs=1e-4)


def test_jet_range_peaks_at_half_height():
    H, step = 2.0, 0.001
    grid = [k * step for k in range(int(H / step))]
    best = max(grid, key=lambda h: jet_range(H, h))
    assert abs(best - H / 2) <= step


def test_jet_geometry_errors():
    with pytest.raises(InvalidGeometry):
        jet_range(1.0, 1.0)
    with pytest.raises(InvalidGeometry):
        jet_range(1.0, -0.1)
    with pytest.raises(ValueError):
        PhysicsConfig(0)


def test_trajectory_endpoints():
    pts = jet_trajectory(1.0, 0.5)
    assert len(pts) == 32
    assert pts[0] == (0.0, 0.5)
    assert pts[-1] == (jet_range(1.0, 0.5), 0.0)
    assert all(a[0] < b[0] and a[1] > b[1] for a, b in zip(pts, pts[1:]))


def test_buoyancy_examples():
    assert buoyant_fraction(917, 1000) == (pytest.approx(0.917), True)
    assert buoyant_fraction(1000, 1000) == (1.0, True)
    assert buoyant_fraction(7850, 1000) == (1.0, False)
    with pytest.raises(NonpositiveDensity):
        buoyant_fraction(0, 1000)


def test_buoyancy_fraction_in_unit_interval():
    rng = random.Random(0)
    for _ in range(1000):
        ro, rf = rng.uniform(1e-3, 2e4), rng.uniform(1e-3, 2e4)
        frac, floats = buoyant_fraction(ro, rf)
        assert 0.0 <= frac <= 1.0
        assert floats == (ro <= rf)


# --- annotations ----------------------------------------------------------------


def base_ir():
    return CanvasIR(400, 400, (
        CanvasNode("cup#0", "rect", 0, "cup", "red", (40.0, 60.0, 50.0, 30.0)),
        CanvasNode("tank#0", "rect", 1, "tank", "blue", (200.0, 200.0, 120.0, 160.0)),
    ))


def only_additions(before, after, added):
    d = diff_canvases(before, after)
    assert d.added == tuple(sorted(added))
    assert not (d.removed or d.moved or d.recolored or d.retexted)
    for n in before.nodes:
        assert after.find(n.id) == n


def test_reflection_annotation_center():
    ir = base_ir()
    ann = ReflectionPair("cup#0", (200.0, 0.0), (0.0, 1.0))
    out = annotate_sketch(ir, ann)
    twin = out.find("cup#0:reflection")
    assert twin.label == "cup:reflection"
    want = mirror_reflect(ir.find("cup#0").center(), ann.mirror_point, ann.mirror_direction)
    assert twin.center() == pytest.approx(want, abs=0.01)
    only_additions(ir, out, ["cup#0:reflection"])
    assert b'data-label="cup:reflection"' in emit_svg(out)


def test_jet_arc_endpoints():
    ir = base_ir()
    frame = WorldFrame(200.0, (20.0, 380.0))
    out = annotate_sketch(ir, JetArc(1.0, 0.5), frame)
    arc = out.find("jet:arc")
    assert arc.kind == "polygon" and len(arc.points) == 32
    assert arc.points[0] == pytest.approx(frame.to_px((0.0, 0.5)), abs=0.01)
    assert arc.points[-1] == pytest.approx(frame.to_px((jet_range(1.0, 0.5), 0.0)), abs=0.01)
    only_additions(ir, out, ["jet:arc"])


def test_zero_extension_spring_sits_at_rest_marker():
    ir = base_ir()
    frame = WorldFrame(100.0, (100.0, 50.0))
    out = annotate_sketch(ir, SpringAnnotation((0.0, 0.0), 1.5, spring_extension(0, 50)), frame)
    body, rest = out.find("spring:body"), out.find("spring:rest")
    assert body.bbox[1] + body.bbox[3] == pytest.approx(rest.bbox[1], abs=0.01)
    assert body.bbox[3] == pytest.approx(150.0, abs=0.01)
    only_additions(ir, out, ["spring:body", "spring:rest"])


def test_loaded_spring_extends_past_marker():
    frame = WorldFrame(100.0, (100.0, 50.0))
    out = annotate_sketch(base_ir(), SpringAnnotation((0.0, 0.0), 1.0, spring_extension(10, 20)), frame)
    body, rest = out.find("spring:body"), out.find("spring:rest")
    assert body.bbox[1] + body.bbox[3] - rest.bbox[1] == pytest.approx(50.0, abs=0.01)


def test_waterline():
    ir = base_ir()
    out = annotate_sketch(ir, Waterline("tank#0", 917, 1000))
    line = out.find("tank#0:waterline")
    x, y, w, h = ir.find("tank#0").bbox
    assert line.center()[1] == pytest.approx(y + h - 0.917 * h, abs=0.01)
    assert line.label == "waterline:floats"
    only_additions(ir, out, ["tank#0:waterline"])


def test_overflow():
    with pytest.raises(GeometryOverflow):
        annotate_sketch(base_ir(), JetArc(1.0, 0.5), WorldFrame(2000.0, (20.0, 380.0)))


def test_world_annotation_needs_frame():
    with pytest.raises(ValueError):
        annotate_sketch(base_ir(), JetArc(1.0, 0.5))


def test_annotation_requests():
    ann, frame = annotation_from_dict({"type": "jet", "H": 1.0, "h": 0.5, "scale": 200, "origin": [10, 390]})
    assert ann == JetArc(1.0, 0.5) and frame == WorldFrame(200.0, (10.0, 390.0))
    ann, frame = annotation_from_dict({"type": "spring", "force": 10, "stiffness": 200, "natural_length": 1, "scale": 1, "origin": [0, 0]})
    assert ann.extension == pytest.approx(0.05)
    assert annotation_from_dict({"type": "waterline", "body": "b", "rho_object": 1, "rho_fluid": 2}) == (Waterline("b", 1.0, 2.0), None)
    with pytest.raises(ValueError):
        annotation_from_dict({"type": "lens"})
