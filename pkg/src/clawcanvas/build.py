"""One-call record -> artifacts compilation shared by the CLI and the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .ir import CanvasIR, compile_canvas
from .layout import LayoutSolution, SolverParams, layout_to_json, solve
from .records import SceneRecord
from .svg import emit_svg
from .textlayer import emit_html_text_layer


@dataclass(frozen=True)
class Artifacts:
    record: SceneRecord
    layout: LayoutSolution
    ir: CanvasIR
    svg: bytes
    html: bytes | None
    layout_json: bytes


def with_seed(record: SceneRecord, seed: int | None) -> SceneRecord:
    if seed is None or seed == record.canvas.seed:
        return record
    return replace(record, canvas=replace(record.canvas, seed=seed))


def compile_artifacts(record: SceneRecord, seed: int | None = None, params: SolverParams | None = None) -> Artifacts:
    """Solve, compile and emit; ``seed`` overrides the record's canvas seed."""
    record = with_seed(record, seed)
    layout = solve(record, params)
    ir = compile_canvas(record, layout)
    html = emit_html_text_layer(record) if record.texts else None
    return Artifacts(record, layout, ir, emit_svg(ir), html, layout_to_json(layout))
