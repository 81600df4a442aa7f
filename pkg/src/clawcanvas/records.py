"""Structured scene records (``*.scene.jsonl``).

Every line is a JSON object with a ``kind`` of config, object, text, relation
or fact.  Parsing canonicalizes on the way in: objects and texts are sorted by
id, relations are normalized to five kinds (right_of and below become mirrored
left_of and above) and sorted, facts are sorted by claim.  Unknown fields are
kept in ``extra`` and written back verbatim.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from . import palette
from .errors import ClawCanvasError
from .jsonutil import dumps_line

SIZE_CLASSES = ("small", "medium", "large")
SHAPE_HINTS = ("rect", "ellipse", "polygon")
TEXT_SIZES = ("title", "subtitle", "body", "caption")
ALIGNMENTS = ("left", "center", "right")
RELATION_KINDS = ("left_of", "right_of", "above", "below", "occludes", "inside", "near")
CANONICAL_RELATIONS = ("above", "inside", "left_of", "near", "occludes")
_MIRRORED = {"right_of": "left_of", "below": "above"}
LINE_KINDS = ("config", "object", "text", "relation", "fact")

RESERVED_IDS = frozenset({"__background__"})
_XML_BAD = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f￾￿]")


class RecordError(ClawCanvasError):
    pass


class MalformedLine(RecordError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: malformed" + (f" ({reason})" if reason else ""))


class UnknownKind(RecordError):
    def __init__(self, line_no: int, kind: object):
        self.line_no = line_no
        self.kind = kind
        super().__init__(f"line {line_no}: unknown kind {kind!r}")


class DuplicateId(RecordError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"duplicate id {id!r}")


class DanglingReference(RecordError):
    def __init__(self, relation: "RelationConstraint", id: str):
        self.relation = relation
        self.id = id
        super().__init__(f"relation {relation.kind}({relation.subject}, {relation.object}) references unknown id {id!r}")


class InvalidCount(RecordError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"object {id!r}: count must be a positive integer")


class DuplicateConfig(RecordError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: more than one config line")


class EmptyRecord(RecordError):
    def __init__(self):
        super().__init__("record has neither objects nor texts")


@dataclass(frozen=True)
class CanvasConfig:
    width: int = 1024
    height: int = 1024
    seed: int = 0
    background: str | None = None
    extra: dict = field(default_factory=dict, compare=True, hash=False)


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    class_label: str
    count: int = 1
    color: str | None = None
    size_class: str | None = None
    shape_hint: str | None = None
    explicit_position: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict, compare=True, hash=False)


@dataclass(frozen=True)
class TextSpec:
    id: str
    content: str
    size_class: str = "body"
    alignment: str = "left"
    region: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    level: int = 0
    extra: dict = field(default_factory=dict, compare=True, hash=False)


@dataclass(frozen=True)
class RelationConstraint:
    kind: str
    subject: str
    object: str
    extra: dict = field(default_factory=dict, compare=True, hash=False)

    def key(self) -> tuple[str, str, str]:
        return (self.kind, self.subject, self.object)


@dataclass(frozen=True)
class KnowledgeFact:
    claim: str
    source_uri: str = ""
    retrieved_at: str = ""
    id: str | None = None
    extra: dict = field(default_factory=dict, compare=True, hash=False)


@dataclass(frozen=True)
class SceneRecord:
    canvas: CanvasConfig = field(default_factory=CanvasConfig)
    objects: tuple[ObjectSpec, ...] = ()
    texts: tuple[TextSpec, ...] = ()
    relations: tuple[RelationConstraint, ...] = ()
    facts: tuple[KnowledgeFact, ...] = ()
    request_digest: str = ""

    def object(self, id: str) -> ObjectSpec:
        for o in self.objects:
            if o.id == id:
                return o
        raise KeyError(id)

    @property
    def total_instances(self) -> int:
        return sum(o.count for o in self.objects)


# --- parsing ---------------------------------------------------------------


def _is_int(v: object) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v: object) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _choice(d: dict, key: str, allowed, line_no: int, default=None):
    v = d.pop(key, default)
    if v is None:
        return default
    if v not in allowed:
        raise MalformedLine(line_no, f"{key} must be one of {', '.join(allowed)}")
    return v


def _color(d: dict, key: str, line_no: int) -> str | None:
    v = d.pop(key, None)
    if v is None:
        return None
    if not palette.is_color(v):
        raise MalformedLine(line_no, f"{key} {v!r} is not a palette color")
    return v


def _ident(d: dict, line_no: int) -> str:
    v = d.pop("id", None)
    if not isinstance(v, str) or not v:
        raise MalformedLine(line_no, "id must be a non-empty string")
    if "#" in v or ":" in v or v in RESERVED_IDS or _XML_BAD.search(v):
        raise MalformedLine(line_no, f"id {v!r} uses a reserved character or name")
    return v


def _parse_config(d: dict, line_no: int) -> tuple[CanvasConfig, str]:
    width = d.pop("width", 1024)
    height = d.pop("height", 1024)
    seed = d.pop("seed", 0)
    digest = d.pop("request_digest", "")
    for name, v in (("width", width), ("height", height)):
        if not _is_int(v) or v < 64:
            raise MalformedLine(line_no, f"{name} must be an integer >= 64")
    if not _is_int(seed) or not 0 <= seed < 1 << 64:
        raise MalformedLine(line_no, "seed must be a 64-bit unsigned integer")
    if not isinstance(digest, str) or (digest and not re.fullmatch(r"[0-9a-f]+", digest)):
        raise MalformedLine(line_no, "request_digest must be lowercase hex text")
    background = _color(d, "background", line_no)
    return CanvasConfig(width, height, seed, background, d), digest


def _parse_object(d: dict, line_no: int) -> ObjectSpec:
    oid = _ident(d, line_no)
    count = d.pop("count", 1)
    if not _is_int(count) or count < 1:
        raise InvalidCount(oid)
    label = d.pop("class_label", oid)
    if not isinstance(label, str) or not label or ":" in label or _XML_BAD.search(label):
        raise MalformedLine(line_no, "class_label must be a non-empty string without ':'")
    color = _color(d, "color", line_no)
    size = _choice(d, "size_class", SIZE_CLASSES, line_no)
    shape = _choice(d, "shape_hint", SHAPE_HINTS, line_no)
    pos = d.pop("explicit_position", None)
    if pos is not None:
        if not (isinstance(pos, list) and len(pos) == 2 and all(_is_num(v) and 0 <= v <= 1 for v in pos)):
            raise MalformedLine(line_no, "explicit_position must be [x, y] in [0, 1]")
        if count != 1:
            raise MalformedLine(line_no, "explicit_position requires count = 1")
        pos = (float(pos[0]), float(pos[1]))
    return ObjectSpec(oid, label, count, color, size, shape, pos, d)


def _parse_text(d: dict, line_no: int) -> TextSpec:
    tid = _ident(d, line_no)
    content = d.pop("content", None)
    if not isinstance(content, str) or not content:
        raise MalformedLine(line_no, "content must be a non-empty string")
    if _XML_BAD.search(content):
        raise MalformedLine(line_no, "content contains characters that cannot be serialized")
    size = _choice(d, "size_class", TEXT_SIZES, line_no, "body")
    align = _choice(d, "alignment", ALIGNMENTS, line_no, "left")
    region = d.pop("region", [0.0, 0.0, 1.0, 1.0])
    if not (isinstance(region, list) and len(region) == 4 and all(_is_num(v) and 0 <= v <= 1 for v in region)):
        raise MalformedLine(line_no, "region must be [x, y, w, h] in [0, 1]")
    if region[2] <= 0 or region[3] <= 0:
        raise MalformedLine(line_no, "region width and height must be positive")
    level = d.pop("level", 0)
    if not _is_int(level) or level < 0:
        raise MalformedLine(line_no, "level must be a non-negative integer")
    return TextSpec(tid, content, size, align, tuple(float(v) for v in region), level, d)


def _parse_relation(d: dict, line_no: int) -> RelationConstraint:
    kind = d.pop("relation", None)
    if kind not in RELATION_KINDS:
        raise MalformedLine(line_no, f"relation must be one of {', '.join(RELATION_KINDS)}")
    subject, obj = d.pop("subject", None), d.pop("object", None)
    if not (isinstance(subject, str) and isinstance(obj, str) and subject and obj):
        raise MalformedLine(line_no, "subject and object must be ids")
    if subject == obj:
        raise MalformedLine(line_no, "subject and object must differ")
    if kind in _MIRRORED:
        kind, subject, obj = _MIRRORED[kind], obj, subject
    return RelationConstraint(kind, subject, obj, d)


def _parse_fact(d: dict, line_no: int) -> KnowledgeFact:
    claim = d.pop("claim", None)
    if not isinstance(claim, str) or not claim:
        raise MalformedLine(line_no, "claim must be a non-empty string")
    uri = d.pop("source_uri", "")
    stamp = d.pop("retrieved_at", "")
    fid = d.pop("id", None)
    if not isinstance(uri, str) or not isinstance(stamp, str) or not (fid is None or isinstance(fid, str)):
        raise MalformedLine(line_no, "source_uri, retrieved_at and id must be strings")
    return KnowledgeFact(claim, uri, stamp, fid, d)


def parse_records(data: bytes | str) -> SceneRecord:
    """Parse a JSONL scene record and return it in canonical order."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedLine(1, "input is not UTF-8") from exc
    config: CanvasConfig | None = None
    digest = ""
    objects: list[ObjectSpec] = []
    texts: list[TextSpec] = []
    relations: list[RelationConstraint] = []
    facts: list[KnowledgeFact] = []
    for line_no, line in enumerate(data.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, "invalid JSON") from exc
        if not isinstance(d, dict):
            raise MalformedLine(line_no, "line is not a JSON object")
        if "kind" not in d:
            raise MalformedLine(line_no, "missing kind")
        kind = d.pop("kind")
        if kind not in LINE_KINDS:
            raise UnknownKind(line_no, kind)
        if kind == "config":
            if config is not None:
                raise DuplicateConfig(line_no)
            config, digest = _parse_config(d, line_no)
        elif kind == "object":
            objects.append(_parse_object(d, line_no))
        elif kind == "text":
            texts.append(_parse_text(d, line_no))
        elif kind == "relation":
            relations.append(_parse_relation(d, line_no))
        else:
            facts.append(_parse_fact(d, line_no))

    seen: set[str] = set()
    for spec in [*objects, *texts]:
        if spec.id in seen:
            raise DuplicateId(spec.id)
        seen.add(spec.id)
    fact_ids = [f.id for f in facts if f.id is not None]
    if len(set(fact_ids)) != len(fact_ids):
        raise DuplicateId(next(i for i in fact_ids if fact_ids.count(i) > 1))
    if not objects and not texts:
        raise EmptyRecord()
    object_ids = {o.id for o in objects}
    for rel in relations:
        for ref in (rel.subject, rel.object):
            if ref not in object_ids:
                raise DanglingReference(rel, ref)
    return make_record(config or CanvasConfig(), objects, texts, relations, facts, digest)


def parse_facts(data: bytes | str) -> tuple[KnowledgeFact, ...]:
    """Parse a JSONL stream holding only fact lines, sorted by claim."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedLine(1, "input is not UTF-8") from exc
    facts = []
    for line_no, line in enumerate(data.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, "invalid JSON") from exc
        if not isinstance(d, dict):
            raise MalformedLine(line_no, "line is not a JSON object")
        kind = d.pop("kind", None)
        if kind != "fact":
            raise UnknownKind(line_no, kind)
        facts.append(_parse_fact(d, line_no))
    return tuple(sorted(facts, key=lambda f: (f.claim, f.id or "", f.source_uri, f.retrieved_at)))


def serialize_facts(facts) -> bytes:
    out = []
    for f in sorted(facts, key=lambda f: (f.claim, f.id or "", f.source_uri, f.retrieved_at)):
        fields = {"claim": f.claim, "source_uri": f.source_uri, "retrieved_at": f.retrieved_at}
        if f.id is not None:
            fields["id"] = f.id
        out.append(_line("fact", fields, f.extra))
    return "".join(line + "\n" for line in out).encode("utf-8")


def make_record(canvas, objects=(), texts=(), relations=(), facts=(), request_digest="") -> SceneRecord:
    """Build a record with canonical ordering; relations are normalized, duplicates dropped."""
    norm = {}
    for rel in relations:
        if rel.kind in _MIRRORED:
            rel = RelationConstraint(_MIRRORED[rel.kind], rel.object, rel.subject, rel.extra)
        norm.setdefault(rel.key(), rel)
    return SceneRecord(
        canvas=canvas,
        objects=tuple(sorted(objects, key=lambda o: o.id)),
        texts=tuple(sorted(texts, key=lambda t: t.id)),
        relations=tuple(norm[k] for k in sorted(norm)),
        facts=tuple(sorted(facts, key=lambda f: (f.claim, f.id or "", f.source_uri, f.retrieved_at))),
        request_digest=request_digest,
    )


# --- serialization ---------------------------------------------------------


def _line(kind: str, fields: dict, extra: dict) -> str:
    d = dict(extra)
    d.update(fields)
    d["kind"] = kind
    return dumps_line(d)


def canonical_serialize(record: SceneRecord) -> bytes:
    c = record.canvas
    lines = [
        _line(
            "config",
            {
                "width": c.width,
                "height": c.height,
                "seed": c.seed,
                "background": c.background,
                "request_digest": record.request_digest,
            },
            c.extra,
        )
    ]
    for o in sorted(record.objects, key=lambda o: o.id):
        lines.append(
            _line(
                "object",
                {
                    "id": o.id,
                    "class_label": o.class_label,
                    "count": o.count,
                    "color": o.color,
                    "size_class": o.size_class,
                    "shape_hint": o.shape_hint,
                    "explicit_position": list(o.explicit_position) if o.explicit_position else None,
                },
                o.extra,
            )
        )
    for t in sorted(record.texts, key=lambda t: t.id):
        lines.append(
            _line(
                "text",
                {
                    "id": t.id,
                    "content": t.content,
                    "size_class": t.size_class,
                    "alignment": t.alignment,
                    "region": list(t.region),
                    "level": t.level,
                },
                t.extra,
            )
        )
    for r in sorted(record.relations, key=lambda r: r.key()):
        lines.append(_line("relation", {"relation": r.kind, "subject": r.subject, "object": r.object}, r.extra))
    for f in sorted(record.facts, key=lambda f: (f.claim, f.id or "", f.source_uri, f.retrieved_at)):
        fields = {"claim": f.claim, "source_uri": f.source_uri, "retrieved_at": f.retrieved_at}
        if f.id is not None:
            fields["id"] = f.id
        lines.append(_line("fact", fields, f.extra))
    return ("\n".join(lines) + "\n").encode("utf-8")


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    code: str
    detail: str
    ids: tuple[str, ...] = ()
    axis: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def has_cycles(self) -> bool:
        return any(i.code.startswith("Cyclic") for i in self.issues)


def cyclic_nodes(edges: list[tuple[str, str]]) -> list[str]:
    """Nodes on or feeding only into cycles: whatever Kahn's algorithm cannot remove."""
    nodes = sorted({n for e in edges for n in e})
    indeg = {n: 0 for n in nodes}
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    queue = [n for n in nodes if indeg[n] == 0]
    removed = set()
    while queue:
        n = queue.pop()
        removed.add(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    # peel off nodes that only hang downstream of a cycle
    rest = set(nodes) - removed
    changed = True
    while changed:
        changed = False
        for n in sorted(rest):
            if not any(m in rest for m in succ[n]):
                rest.discard(n)
                changed = True
    return sorted(rest)


def validate(record: SceneRecord) -> ValidationReport:
    issues: list[Issue] = []
    by_kind: dict[str, list[tuple[str, str]]] = {}
    for r in record.relations:
        by_kind.setdefault(r.kind, []).append((r.subject, r.object))
    for kind, code, axis in (
        ("left_of", "CyclicConstraint", "x"),
        ("above", "CyclicConstraint", "y"),
        ("inside", "CyclicInside", None),
        ("occludes", "CyclicOcclusion", None),
    ):
        cyc = cyclic_nodes(by_kind.get(kind, []))
        if cyc:
            where = f" on axis {axis}" if axis else ""
            issues.append(Issue(code, f"{kind} relations form a cycle{where}: {', '.join(cyc)}", tuple(cyc), axis))
    eps = 1e-9
    for t in record.texts:
        x, y, w, h = t.region
        if x + w > 1 + eps or y + h > 1 + eps:
            issues.append(Issue("RegionOverflow", f"text {t.id!r} region extends past the canvas", (t.id,)))
    return ValidationReport(tuple(issues))
