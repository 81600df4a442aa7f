"""Regenerate the bundled offline fixture cases under src/clawcanvas/fixtures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from clawcanvas.build import compile_artifacts
from clawcanvas.layers.image import Image, encode_png
from clawcanvas.records import parse_records

ROOT = Path(__file__).resolve().parent.parent / "src" / "clawcanvas" / "fixtures"

APPLES = [
    {"kind": "config", "width": 512, "height": 512, "seed": 7, "background": "white"},
    {"kind": "object", "id": "apple", "class_label": "apple", "count": 3, "color": "red", "size_class": "small", "shape_hint": "ellipse"},
    {"kind": "object", "id": "basket", "class_label": "basket", "count": 1, "color": "brown", "size_class": "large"},
    {"kind": "relation", "relation": "above", "subject": "apple", "object": "basket"},
    {"kind": "text", "id": "title", "content": "Three red apples", "size_class": "title", "alignment": "center", "region": [0.05, 0.85, 0.9, 0.12]},
]

SEARCH_FACTS = [
    {"kind": "fact", "id": "s1", "claim": "The 2024 Summer Olympics were hosted by Paris", "source_uri": "https://example.org/olympics-2024", "retrieved_at": "2026-01-01T00:00:00Z"},
]

POSTER = [
    {"kind": "config", "width": 512, "height": 512, "seed": 3, "background": "white"},
    {"kind": "object", "id": "torch", "class_label": "torch", "count": 1, "color": "orange", "size_class": "medium"},
    {"kind": "text", "id": "title", "content": "Summer Games 2024: Rome", "size_class": "title", "alignment": "center", "region": [0.05, 0.05, 0.9, 0.15]},
    {"kind": "fact", "id": "f1", "claim": "The 2024 Summer Olympics were hosted by Rome", "source_uri": "https://example.org/olympics-2024", "retrieved_at": "2026-01-01T00:00:00Z"},
]


def jsonl(rows) -> bytes:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows).encode("utf-8")


def picture(seed: int) -> bytes:
    rng = np.random.default_rng(seed)
    rgba = rng.integers(0, 256, size=(64, 64, 4), dtype=np.uint8)
    rgba[..., 3] = 255
    return encode_png(Image(rgba))


def review(verdict, *findings) -> bytes:
    return (json.dumps({"verdict": verdict, "findings": list(findings)}, indent=2, sort_keys=True) + "\n").encode("utf-8")


def write_case(name: str, files: dict[str, bytes]) -> None:
    d = ROOT / name
    d.mkdir(parents=True, exist_ok=True)
    for old in d.iterdir():
        old.unlink()
    for fname, data in files.items():
        (d / fname).write_bytes(data)


def main() -> None:
    apples = jsonl(APPLES)
    facts = jsonl(SEARCH_FACTS)
    write_case("happy", {
        "facts.jsonl": facts,
        "record.scene.jsonl": apples,
        "generated.png": picture(1),
        "review.json": review("pass"),
    })
    write_case("bad_fact", {
        "facts.jsonl": facts,
        "record.scene.jsonl": jsonl(POSTER),
        "generated.png": picture(2),
        "review.json": review("fail", {"category": "factual", "detail": "poster names Rome as the host city; retrieved sources say Paris", "refs": ["f1"]}),
    })
    # a hand-authored sketch that drops one of the three apples
    svg = compile_artifacts(parse_records(apples)).svg.decode("utf-8")
    faulty = "".join(line for line in svg.splitlines(keepends=True) if 'id="apple#2"' not in line)
    write_case("bad_sketch", {
        "facts.jsonl": facts,
        "record.scene.jsonl": apples,
        "sketch.svg": faulty.encode("utf-8"),
        "generated.png": picture(3),
        "review.json": review("fail", {"category": "structural", "detail": "two apples drawn, three requested", "refs": ["apple"]}),
    })
    write_case("bad_render", {
        "facts.jsonl": facts,
        "record.scene.jsonl": apples,
        "generated.png": picture(4),
        "review.json": review("fail", {"category": "visual", "detail": "render shows two apples, sketch has three", "refs": ["apple"]}),
    })


if __name__ == "__main__":
    main()
