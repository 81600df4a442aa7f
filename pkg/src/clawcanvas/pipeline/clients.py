"""Tool client interfaces and the fixture-backed offline implementation.

A fixture directory holds one canned response per client:

    facts.jsonl          search results (fact lines, scene-record format)
    record.scene.jsonl   the reasoner's scene record
    generated.png        the generator's image
    review.json          the reviewer's report
    sketch.svg           optional: a hand-authored sketch that replaces the compiled one

A missing file makes the corresponding call fail.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from ..layers.image import Image, decode_image
from ..records import KnowledgeFact, SceneRecord, parse_facts

FIXTURES_ENV = "CLAWCANVAS_FIXTURES"
FINDING_CATEGORIES = ("factual", "structural", "visual")


@dataclass(frozen=True)
class Finding:
    category: str
    detail: str
    refs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.category not in FINDING_CATEGORIES:
            raise ValueError(f"unknown finding category {self.category!r}")
        object.__setattr__(self, "refs", tuple(self.refs))


@dataclass(frozen=True)
class ReviewReport:
    verdict: str
    findings: tuple[Finding, ...] = ()

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValueError(f"verdict must be pass or fail, got {self.verdict!r}")
        object.__setattr__(self, "findings", tuple(self.findings))
        if self.verdict == "fail" and not self.findings:
            raise ValueError("a failing review needs at least one finding")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "findings": [{"category": f.category, "detail": f.detail, "refs": list(f.refs)} for f in self.findings],
            "verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewReport":
        if not isinstance(d, dict):
            raise ValueError("review must be a JSON object")
        findings = tuple(Finding(f["category"], f.get("detail", ""), tuple(f.get("refs", ()))) for f in d.get("findings", ()))
        return cls(d.get("verdict"), findings)


class SearchClient(Protocol):
    def __call__(self, query: str) -> list[KnowledgeFact]: ...


class ReasonerClient(Protocol):
    def __call__(self, request: str, facts: list[KnowledgeFact]) -> bytes: ...


class GeneratorClient(Protocol):
    def __call__(self, sketch_svg: bytes, text_html: bytes | None, style: str) -> Image: ...


class ReviewerClient(Protocol):
    def __call__(self, image: Image, record: SceneRecord) -> ReviewReport: ...


class SketcherClient(Protocol):
    """Optional: returns SVG bytes to use instead of the compiled sketch, or None."""

    def __call__(self, record: SceneRecord, compiled_svg: bytes) -> bytes | None: ...


@dataclass
class ToolClients:
    search: SearchClient
    reasoner: ReasonerClient
    generator: GeneratorClient
    reviewer: ReviewerClient
    sketcher: SketcherClient | None = None


class FixtureClients:
    """Offline clients that replay canned responses from a directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise FileNotFoundError(f"fixture directory {self.directory} does not exist")

    def _read(self, name: str) -> bytes:
        return (self.directory / name).read_bytes()

    def search(self, query: str) -> list[KnowledgeFact]:
        return list(parse_facts(self._read("facts.jsonl")))

    def reasoner(self, request: str, facts: list[KnowledgeFact]) -> bytes:
        return self._read("record.scene.jsonl")

    def generator(self, sketch_svg: bytes, text_html: bytes | None, style: str) -> Image:
        return decode_image(self._read("generated.png"))

    def reviewer(self, image: Image, record: SceneRecord) -> ReviewReport:
        return ReviewReport.from_dict(json.loads(self._read("review.json")))

    def sketcher(self, record: SceneRecord, compiled_svg: bytes) -> bytes | None:
        path = self.directory / "sketch.svg"
        return path.read_bytes() if path.exists() else None

    def clients(self) -> ToolClients:
        return ToolClients(self.search, self.reasoner, self.generator, self.reviewer, self.sketcher)


def fixtures_dir(explicit: str | Path | None = None) -> Path | None:
    """Explicit path, else the environment variable, else None."""
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(FIXTURES_ENV)
    return Path(env) if env else None


def bundled_fixtures() -> Path:
    """Directory holding the packaged fixture cases (happy, bad_fact, bad_sketch, bad_render)."""
    return Path(__file__).resolve().parent.parent / "fixtures"

