"""Append-only provenance ledger (``ledger.jsonl``), one stage trace per line."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import ClawCanvasError
from ..jsonutil import dumps_line

STAGES = ("conceptualize", "sketch", "color", "review")
TIMESTAMP_FIELDS = ("started_at", "finished_at")


class LedgerIncomplete(ClawCanvasError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__("ledger lacks stage(s): " + ", ".join(missing))


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class ToolCall:
    client: str
    attempt: int
    status: str  # ok | error | timeout
    input_digest: str
    output_digest: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "attempt": self.attempt,
            "client": self.client,
            "error": self.error,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
            "status": self.status,
        }


@dataclass
class StageTrace:
    stage: str
    started_at: str = field(default_factory=now)
    finished_at: str = ""
    status: str = "running"
    inputs: dict[str, str] = field(default_factory=dict)  # name -> digest
    outputs: dict[str, str] = field(default_factory=dict)  # artifact path -> digest
    calls: list[ToolCall] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "calls": [c.to_dict() for c in self.calls],
            "finished_at": self.finished_at,
            "inputs": dict(sorted(self.inputs.items())),
            "notes": self.notes,
            "outputs": dict(sorted(self.outputs.items())),
            "stage": self.stage,
            "started_at": self.started_at,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StageTrace":
        return cls(
            stage=d["stage"],
            started_at=d.get("started_at", ""),
            finished_at=d.get("finished_at", ""),
            status=d.get("status", ""),
            inputs=dict(d.get("inputs", {})),
            outputs=dict(d.get("outputs", {})),
            calls=[ToolCall(**c) for c in d.get("calls", [])],
            notes=dict(d.get("notes", {})),
        )


class PipelineLedger:
    """Stage traces in pipeline order; optionally mirrored to a JSONL file as they close."""

    def __init__(self, path: str | Path | None = None, entries=()):
        self.path = Path(path) if path is not None else None
        self.entries: list[StageTrace] = list(entries)
        if self.path is not None:
            self.path.write_bytes(b"")

    def append(self, trace: StageTrace) -> None:
        if self.entries and STAGES.index(trace.stage) <= STAGES.index(self.entries[-1].stage):
            raise ValueError(f"stage {trace.stage!r} out of order")
        trace.finished_at = trace.finished_at or now()
        self.entries.append(trace)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8", newline="\n") as fh:
                fh.write(dumps_line(trace.to_dict()) + "\n")

    def stage(self, name: str) -> StageTrace | None:
        return next((e for e in self.entries if e.stage == name), None)

    def stages(self) -> list[str]:
        return [e.stage for e in self.entries]

    def calls(self) -> list[ToolCall]:
        return [c for e in self.entries for c in e.calls]

    def without_timestamps(self) -> list[dict]:
        out = []
        for e in self.entries:
            d = e.to_dict()
            for k in TIMESTAMP_FIELDS:
                d.pop(k)
            out.append(d)
        return out

    @classmethod
    def load(cls, path: str | Path) -> "PipelineLedger":
        entries = [StageTrace.from_dict(json.loads(line)) for line in Path(path).read_text("utf-8").splitlines() if line.strip()]
        ledger = cls(None, entries)
        ledger.path = Path(path)
        return ledger


def check_ledger(ledger: PipelineLedger, workdir: str | Path) -> list[str]:
    """Problems with a ledger against the files on disk (empty when consistent)."""
    workdir = Path(workdir)
    problems = []
    order = [STAGES.index(s) for s in ledger.stages()]
    if order != sorted(set(order)):
        problems.append("stages out of pipeline order")
    for e in ledger.entries:
        for rel, digest in e.outputs.items():
            p = workdir / rel
            if not p.is_file():
                problems.append(f"{e.stage}: artifact {rel} missing")
            elif sha256(p.read_bytes()) != digest:
                problems.append(f"{e.stage}: digest mismatch for {rel}")
    return problems
