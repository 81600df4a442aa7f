"""Think, sketch, color, review: the staged pipeline over pluggable clients."""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field
from pathlib import Path

from ..build import compile_artifacts, with_seed
from ..errors import ClawCanvasError
from ..ir import CanvasIR
from ..jsonutil import dumps_fixed
from ..layers.image import Image, encode_png
from ..physics import annotate_sketch, annotation_from_dict
from ..records import RecordError, SceneRecord, canonical_serialize, parse_records, serialize_facts, validate
from ..svg import SvgError, emit_svg, parse_svg_subset
from ..textlayer import emit_html_text_layer
from ..verify import VerificationReport, verify_canvas
from .clients import ReviewReport, ToolClients
from .ledger import LedgerIncomplete, PipelineLedger, StageTrace, ToolCall, sha256

HTML_TEXT_CHARS = 120
HTML_TEXT_BLOCKS = 3


class StageFailure(ClawCanvasError):
    def __init__(self, stage: str, cause: object, ledger: PipelineLedger | None = None):
        self.stage = stage
        self.cause = cause
        self.ledger = ledger
        super().__init__(f"stage {stage} failed: {cause}")


class ClientTimeout(StageFailure):
    def __init__(self, stage: str, client: str, timeout: float, ledger: PipelineLedger | None = None):
        self.client = client
        super().__init__(stage, f"{client} timed out after {timeout:g} s on every attempt", ledger)


@dataclass(frozen=True)
class PipelineConfig:
    workdir: Path
    seed: int | None = None
    timeout: float = 60.0
    retries: int = 1
    style: str = ""
    annotations: tuple[dict, ...] = ()


@dataclass
class PipelineResult:
    image: Image
    ledger: PipelineLedger
    record: SceneRecord
    sketch_ir: CanvasIR
    verification: VerificationReport
    review: ReviewReport
    backends: frozenset[str]
    attribution: str | None = None
    workdir: Path = field(default=Path("."))

    @property
    def passed(self) -> bool:
        return self.verification.passed and self.review.passed


def select_backend(record: SceneRecord, annotations=()) -> frozenset[str]:
    chosen = set()
    chars = sum(len(t.content) for t in record.texts)
    if chars > HTML_TEXT_CHARS or len(record.texts) >= HTML_TEXT_BLOCKS:
        chosen.add("html_text")
    if record.objects:
        chosen.add("svg_composition")
    if annotations or record.canvas.extra.get("physics"):
        chosen.add("physics")
    if not chosen:
        chosen.add("svg_composition")
    return frozenset(chosen)


def _digest_of(value) -> str:
    if isinstance(value, bytes):
        return sha256(value)
    if isinstance(value, Image):
        return sha256(value.rgba.tobytes())
    if isinstance(value, SceneRecord):
        return sha256(canonical_serialize(value))
    if isinstance(value, ReviewReport):
        return sha256(dumps_fixed(value.to_dict()).encode("utf-8"))
    if isinstance(value, (list, tuple)):
        return sha256(b"\0".join(bytes.fromhex(_digest_of(v)) for v in value))
    if value is None:
        return sha256(b"")
    return sha256(str(value).encode("utf-8"))


class _Stage:
    """Runs one stage: bounded client calls, artifact writes and the trace."""

    def __init__(self, name: str, run: "_Run"):
        self.name = name
        self.run = run
        self.trace = StageTrace(name)

    def call(self, client: str, fn, *args):
        cfg = self.run.config
        in_digest = _digest_of(list(args))
        timed_out = True
        last: BaseException | None = None
        for attempt in range(1, cfg.retries + 2):
            pool = cf.ThreadPoolExecutor(max_workers=1)
            try:
                result = pool.submit(fn, *args).result(timeout=cfg.timeout)
            except cf.TimeoutError:
                self.trace.calls.append(ToolCall(client, attempt, "timeout", in_digest, error="timeout"))
                continue
            except Exception as exc:  # noqa: BLE001 - any client fault counts as a failed attempt
                timed_out = False
                last = exc
                self.trace.calls.append(ToolCall(client, attempt, "error", in_digest, error=f"{type(exc).__name__}: {exc}"))
                continue
            finally:
                pool.shutdown(wait=False)
            self.trace.calls.append(ToolCall(client, attempt, "ok", in_digest, _digest_of(result)))
            return result
        if timed_out:
            raise self.fail_with(ClientTimeout(self.name, client, cfg.timeout))
        raise self.fail_with(StageFailure(self.name, f"{client}: {type(last).__name__}: {last}"))

    def write(self, rel: str, data: bytes) -> None:
        (self.run.config.workdir / rel).write_bytes(data)
        self.trace.outputs[rel] = sha256(data)

    def fail_with(self, exc: StageFailure) -> StageFailure:
        self.trace.status = "failed"
        self.trace.notes["error"] = str(exc.cause)
        self.run.ledger.append(self.trace)
        exc.ledger = self.run.ledger
        return exc

    def fail(self, cause) -> StageFailure:
        return self.fail_with(StageFailure(self.name, cause))

    def close(self) -> None:
        self.trace.status = "ok"
        self.run.ledger.append(self.trace)


class _Run:
    def __init__(self, request: str, clients: ToolClients, config: PipelineConfig):
        self.request = request
        self.clients = clients
        self.config = config
        config.workdir.mkdir(parents=True, exist_ok=True)
        self.ledger = PipelineLedger(config.workdir / "ledger.jsonl")

    def conceptualize(self):
        st = _Stage("conceptualize", self)
        st.trace.inputs["request"] = sha256(self.request.encode("utf-8"))
        facts = st.call("search", self.clients.search, self.request)
        raw = st.call("reasoner", self.clients.reasoner, self.request, list(facts))
        try:
            record = parse_records(raw)
        except RecordError as exc:
            raise st.fail(f"reasoner returned an invalid record: {exc}") from None
        report = validate(record)
        if not report.ok:
            raise st.fail("record failed validation: " + "; ".join(i.detail for i in report.issues))
        record = with_seed(record, self.config.seed)
        st.write("facts.jsonl", serialize_facts(facts))
        st.write("record.scene.jsonl", canonical_serialize(record))
        st.trace.notes["fact_ids"] = sorted({f.id for f in facts if f.id is not None})
        st.trace.notes["fact_claims"] = sorted({f.claim for f in facts})
        st.close()
        return record

    def sketch(self, record: SceneRecord):
        st = _Stage("sketch", self)
        st.trace.inputs["record.scene.jsonl"] = sha256(canonical_serialize(record))
        backends = select_backend(record, self.config.annotations)
        st.trace.notes["backends"] = sorted(backends)
        try:
            art = compile_artifacts(record)
        except ClawCanvasError as exc:
            raise st.fail(f"{type(exc).__name__}: {exc}") from None
        ir = art.ir
        if "physics" in backends:
            requests = list(self.config.annotations) + list(record.canvas.extra.get("physics") or [])
            try:
                for req in requests:
                    ann, frame = annotation_from_dict(req)
                    ir = annotate_sketch(ir, ann, frame)
            except (ClawCanvasError, ValueError, KeyError, TypeError) as exc:
                raise st.fail(f"physics annotation: {exc}") from None
        svg = emit_svg(ir)
        if self.clients.sketcher is not None:
            authored = st.call("sketcher", self.clients.sketcher, record, svg)
            if authored is not None:
                try:
                    ir = parse_svg_subset(authored)
                except SvgError as exc:
                    raise st.fail(f"authored sketch is not valid SVG: {exc}") from None
                svg = emit_svg(ir)
                st.trace.notes["sketch_source"] = "sketcher"
        st.write("layout.json", art.layout_json)
        st.write("sketch.svg", svg)
        html = None
        if record.texts:
            html = emit_html_text_layer(record)
            st.write("text.html", html)
            if "html_text" not in backends:
                html = None  # text stays in the SVG; the generator gets no separate layer
        report = verify_canvas(ir, record)
        st.write("verify.report.json", report.to_json())
        st.trace.notes["verify"] = report.overall
        if not report.passed:
            raise st.fail(f"sketch failed verification: {', '.join(report.failed_categories())}")
        st.close()
        return ir, svg, html, report, backends

    def color(self, svg: bytes, html: bytes | None) -> Image:
        st = _Stage("color", self)
        st.trace.inputs["sketch.svg"] = sha256(svg)
        if html is not None:
            st.trace.inputs["text.html"] = sha256(html)
        image = st.call("generator", self.clients.generator, svg, html, self.config.style)
        if not isinstance(image, Image):
            raise st.fail("generator did not return an image")
        st.write("generated.png", encode_png(image))
        st.close()
        return image

    def review(self, image: Image, record: SceneRecord):
        st = _Stage("review", self)
        st.trace.inputs["generated.png"] = sha256(encode_png(image))
        review = st.call("reviewer", self.clients.reviewer, image, record)
        if not isinstance(review, ReviewReport):
            raise st.fail("reviewer did not return a review report")
        # deterministic half: re-verify the persisted sketch, independent of the reviewer
        sketch_bytes = (self.config.workdir / "sketch.svg").read_bytes()
        st.trace.inputs["sketch.svg"] = sha256(sketch_bytes)
        reverify = verify_canvas(parse_svg_subset(sketch_bytes), record)
        st.write("review.json", dumps_fixed(review.to_dict()).encode("utf-8"))
        st.trace.notes["verdict"] = review.verdict
        st.trace.notes["reverify"] = reverify.overall
        st.close()
        return review, reverify


def run_pipeline(request: str, clients: ToolClients, config: PipelineConfig) -> PipelineResult:
    """Run all four stages; a failed review yields a result carrying its attribution."""
    run = _Run(request, clients, config)
    record = run.conceptualize()
    ir, svg, html, report, backends = run.sketch(record)
    image = run.color(svg, html)
    review, reverify = run.review(image, record)
    result = PipelineResult(image, run.ledger, record, ir, reverify, review, backends, workdir=config.workdir)
    if not result.passed:
        result.attribution = attribute_failure(run.ledger, review, record, ir)
    return result


# --- attribution -----------------------------------------------------------------


def attribute_failure(ledger: PipelineLedger, review: ReviewReport, record: SceneRecord, sketch_ir: CanvasIR) -> str:
    """Earliest stage that explains a failed review: conceptualize, sketch, color, or inconclusive."""
    missing = [s for s in ("conceptualize", "sketch") if ledger.stage(s) is None]
    if missing:
        raise LedgerIncomplete(missing)
    concept = ledger.stage("conceptualize")
    retrieved = set(concept.notes.get("fact_ids", ()))
    retrieved_claims = set(concept.notes.get("fact_claims", ()))
    known = {f.id for f in record.facts if f.id is not None}
    known |= {o.id for o in record.objects} | {t.id for t in record.texts}
    unsupported = {f.claim for f in record.facts} - retrieved_claims
    for f in review.findings:
        if f.category != "factual":
            continue
        # the finding points at retrieved context, or at a fact the record never carried
        if any(r in retrieved or r not in known for r in f.refs):
            return "conceptualize"
        if unsupported:
            return "conceptualize"
    if not verify_canvas(sketch_ir, record).passed:
        return "sketch"
    if any(f.category in ("structural", "visual") for f in review.findings):
        return "color"
    return "inconclusive"
