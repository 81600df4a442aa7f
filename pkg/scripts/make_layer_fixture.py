"""Regenerate tests/data/three_layers: a small layer document and its golden composite.

The golden PNG comes from the exact-rational oracle in tests/oracles.py, not from
the package compositor, so the CLI test compares two independent computations.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

TESTS = Path(__file__).resolve().parent.parent / "tests"
sys.path.insert(0, str(TESTS))

from oracles import composite_oracle  # noqa: E402

OUT = TESTS / "data" / "three_layers"
W, H = 24, 16


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)
    bg = np.zeros((H, W, 4), dtype=np.uint8)
    bg[...] = (250, 240, 220, 255)
    mid = rng.integers(0, 256, size=(10, 12, 4), dtype=np.uint8)
    mid[..., 3] = rng.choice(np.array([255, 180, 64], dtype=np.uint8), size=(10, 12))
    mid_mask = np.zeros((10, 12), dtype=bool)
    mid_mask[1:9, 2:11] = True
    top = np.zeros((6, 8, 4), dtype=np.uint8)
    top[...] = (20, 60, 200, 200)

    PILImage.fromarray(bg, "RGBA").save(OUT / "bg.png")
    PILImage.fromarray(mid, "RGBA").save(OUT / "mid.png")
    PILImage.fromarray(mid_mask.astype(np.uint8) * 255, "L").save(OUT / "mid.mask.png")
    PILImage.fromarray(top, "RGBA").save(OUT / "top.png")

    layers = [
        {"id": "bg", "kind": "layer", "mask": None, "name": "ground", "offset": [0, 0], "opacity": 1.0, "origin": "decomposed", "payload": {"path": "bg.png"}, "z": 0},
        {"id": "mid", "kind": "layer", "mask": "mid.mask.png", "name": "noise", "offset": [5, 3], "opacity": 0.8, "origin": "decomposed", "payload": {"path": "mid.png"}, "z": 1},
        {"id": "top", "kind": "layer", "mask": None, "name": "label", "offset": [14, 7], "opacity": 0.5, "origin": "generated", "payload": {"path": "top.png"}, "z": 2},
    ]
    header = {"height": H, "kind": "layerdoc", "width": W}
    text = "\n".join(json.dumps(d, sort_keys=True, separators=(",", ":")) for d in [header] + layers) + "\n"
    (OUT / "doc.layers.jsonl").write_text(text, encoding="utf-8")

    golden = composite_oracle(W, H, [(bg, 1.0, (0, 0), None), (mid, 0.8, (5, 3), mid_mask), (top, 0.5, (14, 7), None)])
    PILImage.fromarray(golden, "RGBA").save(OUT / "golden.png")


if __name__ == "__main__":
    main()
