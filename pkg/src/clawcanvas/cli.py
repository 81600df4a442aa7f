"""Command-line entry point: ``clawcanvas <command> ...``.

Exit codes: 0 ok, 1 input error, 2 unsatisfiable layout, 3 verification or
review failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .build import compile_artifacts
from .errors import ClawCanvasError
from .layers import (
    EmptyMask,
    RegionTooSmall,
    apply_edit,
    composite,
    edit_from_json,
    load_image,
    load_layerdoc,
    load_mask,
    psnr,
    save_image,
    serialize_layerdoc,
    ssim,
    unedited_mask,
)
from .layout import LayoutError
from .physics import (
    JetArc,
    ReflectionPair,
    SpringAnnotation,
    Waterline,
    WorldFrame,
    annotate_sketch,
    buoyant_fraction,
    jet_range,
    mirror_reflect,
    spring_extension,
)
from .pipeline import FixtureClients, PipelineConfig, StageFailure, fixtures_dir, run_pipeline
from .records import RecordError, parse_records, validate
from .svg import emit_svg, parse_svg_subset
from .verify import verify_canvas

EXIT_OK, EXIT_INPUT, EXIT_UNSAT, EXIT_FAIL = 0, 1, 2, 3


class InputError(Exception):
    pass


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json or text is None:
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    else:
        print(text)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _json_number(v: float):
    return "inf" if math.isinf(v) else v


# --- compile / verify -------------------------------------------------------------


def cmd_compile(args) -> int:
    record = parse_records(_read(args.record))
    report = validate(record)
    hard = [i for i in report.issues if not i.code.startswith("Cyclic")]
    if hard:
        raise InputError("; ".join(i.detail for i in hard))
    try:
        art = compile_artifacts(record, seed=args.seed)
    except LayoutError as exc:
        _emit(args, {"error": str(exc), "status": "unsatisfiable"}, f"unsatisfiable: {exc}")
        return EXIT_UNSAT
    out = _outdir(args)
    written = {"layout": "layout.json", "sketch": "sketch.svg"}
    (out / "sketch.svg").write_bytes(art.svg)
    (out / "layout.json").write_bytes(art.layout_json)
    if art.html is not None:
        (out / "text.html").write_bytes(art.html)
        written["text"] = "text.html"
    payload = {
        "instances": len(art.layout.placements),
        "iterations": art.layout.iterations_used,
        "outputs": {k: str(out / v) for k, v in written.items()},
        "seed": art.record.canvas.seed,
        "status": "ok",
    }
    _emit(args, payload, "\n".join(str(out / v) for v in written.values()))
    return EXIT_OK


def cmd_verify(args) -> int:
    record = parse_records(_read(args.record))
    ir = parse_svg_subset(_read(args.canvas))
    report = verify_canvas(ir, record)
    if args.out is not None:
        (_outdir(args) / "verify.report.json").write_bytes(report.to_json())
    _emit(args, report.to_dict(), report.table())
    return EXIT_OK if report.passed else EXIT_FAIL


# --- layers -----------------------------------------------------------------------


def _metrics(before, after, mask) -> dict:
    out = {}
    try:
        out["psnr"] = _json_number(psnr(before, after, mask))
    except EmptyMask as exc:
        out["psnr"], out["psnr_error"] = None, str(exc)
    try:
        out["ssim"] = ssim(before, after, mask)
    except (EmptyMask, RegionTooSmall) as exc:
        out["ssim"], out["ssim_error"] = None, str(exc)
    out["mask_pixels"] = int(np.count_nonzero(mask))
    return out


def cmd_layers(args) -> int:
    if args.layers_cmd == "composite":
        doc = load_layerdoc(args.doc)
        img = composite(doc)
        target = Path(args.output) if args.output else _outdir(args) / "composite.png"
        target.parent.mkdir(parents=True, exist_ok=True)
        save_image(img, target)
        _emit(args, {"height": img.height, "output": str(target), "width": img.width}, str(target))
        return EXIT_OK
    if args.layers_cmd == "edit":
        try:
            op = edit_from_json(json.loads(args.op))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"bad --op: {exc}") from None
        doc = load_layerdoc(args.doc)
        edited = apply_edit(doc, op)
        before, after = composite(doc), composite(edited)
        out = _outdir(args)
        (out / "edited.layers.jsonl").write_bytes(_serialize_beside(edited, doc, out))
        save_image(after, out / "edited.png")
        payload = {"doc": str(out / "edited.layers.jsonl"), "image": str(out / "edited.png")}
        if args.metrics:
            payload["metrics"] = _metrics(before, after, unedited_mask(doc, op))
        text = f"{payload['doc']}\n{payload['image']}"
        if args.metrics:
            text += "\n" + json.dumps(payload["metrics"], sort_keys=True)
        _emit(args, payload, text)
        return EXIT_OK
    a, b = load_image(args.a), load_image(args.b)
    mask = load_mask(args.mask).bits if args.mask else np.ones((a.height, a.width), dtype=bool)
    m = _metrics(a, b, mask)
    _emit(args, m, json.dumps(m, sort_keys=True))
    return EXIT_OK


def _serialize_beside(edited, original, out: Path) -> bytes:
    """Serialize an edited doc into ``out``, rebasing relative payload paths on the original doc."""
    base = original.base_dir or Path(".")
    layers = []
    for ly in edited.layers:
        payload, mask = ly.payload, ly.mask
        if isinstance(payload, str) and not Path(payload).is_absolute():
            payload = str((base / payload).resolve())
        if isinstance(mask, str) and not Path(mask).is_absolute():
            mask = str((base / mask).resolve())
        layers.append(replace(ly, payload=payload, mask=mask))
    return serialize_layerdoc(edited.with_layers(layers), out)


# --- physics ----------------------------------------------------------------------


def _splice(args, annotation, frame=None) -> str | None:
    if not args.sketch:
        return None
    ir = parse_svg_subset(_read(args.sketch))
    out = _outdir(args) / "annotated.sketch.svg"
    out.write_bytes(emit_svg(annotate_sketch(ir, annotation, frame)))
    return str(out)


def _frame(args) -> WorldFrame | None:
    if not args.sketch:
        return None
    if args.scale is None or args.origin is None:
        raise InputError("--sketch needs --scale and --origin")
    return WorldFrame(args.scale, tuple(args.origin))


def cmd_physics(args) -> int:
    kind = args.physics_cmd
    if kind == "jet":
        payload = {"range": jet_range(args.H, args.h)}
        frame = _frame(args)
        svg = _splice(args, JetArc(args.H, args.h, (args.wall_x, 0.0)), frame)
    elif kind == "spring":
        ext = spring_extension(args.F, args.k)
        payload = {"extension": ext}
        frame = _frame(args)
        svg = _splice(args, SpringAnnotation(tuple(args.anchor), args.length, ext), frame) if args.sketch else None
    elif kind == "reflect":
        x, y = mirror_reflect((args.px, args.py), (args.mx, args.my), (args.dx, args.dy))
        payload = {"point": [x, y]}
        svg = None
        if args.sketch:
            if not args.source:
                raise InputError("--sketch needs --source")
            svg = _splice(args, ReflectionPair(args.source, (args.mx, args.my), (args.dx, args.dy)))
    else:
        frac, floats = buoyant_fraction(args.rho_object, args.rho_fluid)
        payload = {"floats": floats, "fraction": frac}
        svg = None
        if args.sketch:
            if not args.body:
                raise InputError("--sketch needs --body")
            svg = _splice(args, Waterline(args.body, args.rho_object, args.rho_fluid))
    if svg is not None:
        payload["sketch"] = svg
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


# --- pipeline ---------------------------------------------------------------------


def cmd_pipeline(args) -> int:
    fixtures = fixtures_dir(args.fixtures)
    if fixtures is None:
        raise InputError("no fixtures: pass --fixtures or set CLAWCANVAS_FIXTURES")
    if not fixtures.is_dir():
        raise InputError(f"fixture directory {fixtures} does not exist")
    if args.timeout <= 0:
        raise InputError("--timeout must be positive")
    clients = FixtureClients(fixtures).clients()
    config = PipelineConfig(Path(args.out), seed=args.seed, timeout=args.timeout)
    try:
        result = run_pipeline(args.request, clients, config)
    except StageFailure as exc:
        stage = exc.stage
        _emit(
            args,
            {"error": str(exc.cause), "ledger": str(config.workdir / "ledger.jsonl"), "stage": stage, "status": "failed"},
            f"pipeline failed\nstage: {stage}\ncause: {exc.cause}",
        )
        return EXIT_FAIL
    stages = result.ledger.stages()
    ledger_path = str(config.workdir / "ledger.jsonl")
    if result.passed:
        _emit(args, {"ledger": ledger_path, "stages": stages, "status": "ok"}, f"ok: {' -> '.join(stages)}\nledger: {ledger_path}")
        return EXIT_OK
    _emit(
        args,
        {
            "findings": result.review.to_dict()["findings"],
            "ledger": ledger_path,
            "stage": result.attribution,
            "stages": stages,
            "status": "review_failed",
        },
        f"review failed\nstage: {result.attribution}\nledger: {ledger_path}",
    )
    return EXIT_FAIL


# --- parser -----------------------------------------------------------------------


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="override the record's canvas seed")
    parser.add_argument("--out", default=d(None), help="output directory (default: current directory)")
    parser.add_argument("--json", action="store_true", default=d(False), help="machine-readable output")
    parser.add_argument("--fixtures", default=d(None), help="mock client fixture directory")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clawcanvas", description="Executable canvas toolkit: records, layouts, sketches, layers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("compile", parents=[common], help="solve and emit sketch.svg, layout.json [, text.html]")
    c.add_argument("record", help="scene record (*.scene.jsonl)")
    c.set_defaults(func=cmd_compile)

    v = sub.add_parser("verify", parents=[common], help="verify an SVG canvas against its record")
    v.add_argument("canvas")
    v.add_argument("record")
    v.set_defaults(func=cmd_verify)

    ly = sub.add_parser("layers", parents=[common], help="layered documents")
    lsub = ly.add_subparsers(dest="layers_cmd", required=True)
    lc = lsub.add_parser("composite", parents=[common])
    lc.add_argument("doc", help="*.layers.jsonl")
    lc.add_argument("-o", "--output", help="output PNG (default: <out>/composite.png)")
    le = lsub.add_parser("edit", parents=[common])
    le.add_argument("doc")
    le.add_argument("--op", required=True, help='edit as JSON, e.g. {"op": "translate", "layer": "cup", "dx": 5, "dy": 0}')
    le.add_argument("--metrics", action="store_true", help="PSNR/SSIM on the unedited region")
    ld = lsub.add_parser("diff-metrics", parents=[common])
    ld.add_argument("a")
    ld.add_argument("b")
    ld.add_argument("--mask", help="grayscale mask PNG (default: whole image)")
    ly.set_defaults(func=cmd_layers)

    ph = sub.add_parser("physics", parents=[common], help="closed-form physical drafts")
    psub = ph.add_subparsers(dest="physics_cmd", required=True)
    sketch_opts = argparse.ArgumentParser(add_help=False)
    sketch_opts.add_argument("--sketch", help="SVG to annotate; writes <out>/annotated.sketch.svg")
    sketch_opts.add_argument("--scale", type=float, help="pixels per metre")
    sketch_opts.add_argument("--origin", type=float, nargs=2, metavar=("X", "Y"), help="pixel position of the world origin")
    j = psub.add_parser("jet", parents=[common, sketch_opts])
    j.add_argument("--H", type=float, required=True, help="liquid surface height, m")
    j.add_argument("--h", type=float, required=True, help="hole height, m")
    j.add_argument("--wall-x", type=float, default=0.0)
    s = psub.add_parser("spring", parents=[common, sketch_opts])
    s.add_argument("--F", type=float, required=True, help="force, N")
    s.add_argument("--k", type=float, required=True, help="stiffness, N/m")
    s.add_argument("--length", type=float, default=1.0, help="natural length, m")
    s.add_argument("--anchor", type=float, nargs=2, default=(0.0, 0.0))
    r = psub.add_parser("reflect", parents=[common, sketch_opts])
    for name in ("px", "py", "mx", "my", "dx", "dy"):
        r.add_argument(f"--{name}", type=float, required=name in ("px", "py", "dx", "dy"), default=0.0)
    r.add_argument("--source", help="node id to mirror when annotating")
    b = psub.add_parser("buoyancy", parents=[common, sketch_opts])
    b.add_argument("--rho-object", type=float, required=True)
    b.add_argument("--rho-fluid", type=float, required=True)
    b.add_argument("--body", help="node id to draw the waterline on")
    ph.set_defaults(func=cmd_physics)

    pl = sub.add_parser("pipeline", parents=[common], help="offline pipeline runs")
    plsub = pl.add_subparsers(dest="pipeline_cmd", required=True)
    pr = plsub.add_parser("run", parents=[common])
    pr.add_argument("request", help="user request text")
    pr.add_argument("--timeout", type=float, default=60.0, help="per-call client timeout, s")
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if args.out is None:
        args.out = "." if args.cmd != "verify" else None
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ClawCanvasError, RecordError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
