"""Random-but-reproducible test inputs.

Records are built from a hidden witness placement, so they are satisfiable by
construction: every relation is read off the witness, and the witness keeps
unrelated instances disjoint.  None of this touches the solver.
"""

from __future__ import annotations

import math
import random

import numpy as np

from clawcanvas import palette
from clawcanvas.records import (
    CanvasConfig,
    KnowledgeFact,
    ObjectSpec,
    RelationConstraint,
    TextSpec,
    make_record,
)

SIZES = {"small": 0.08, "medium": 0.14, "large": 0.22}
COLORS = list(palette.PALETTE)
LABELS = ["apple", "cup", "cat", "ball", "book", "bowl", "tree", "car", "lamp", "vase"]
TEXT_POOL = [
    "MENU",
    "2026 World Cup",
    "滕王阁序",
    "落霞与孤鹜齐飞，秋水共长天一色。",
    "Price: $4.50 & up <today>",
    'He said "hi"',
    "  leading and trailing  ",
    "tab\tseparated",
    "two\nlines",
    "Ünïcödé – ok",
    "emoji 🍎🍏",
    "a",
]


def _overlap(a, b):
    return min(a[0] + a[2], b[0] + b[2]) > max(a[0], b[0]) and min(a[1] + a[3], b[1] + b[3]) > max(a[1], b[1])


def _inter(a, b):
    w = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    h = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    return w * h if w > 0 and h > 0 else 0.0


def _holds(kind, a, b, thr):
    if kind == "left_of":
        return a[0] + a[2] / 2 < b[0] + b[2] / 2 and a[0] + a[2] < b[0]
    if kind == "right_of":
        return _holds("left_of", b, a, thr)
    if kind == "above":
        return a[1] + a[3] / 2 < b[1] + b[3] / 2 and a[1] + a[3] < b[1]
    if kind == "below":
        return _holds("above", b, a, thr)
    if kind == "near":
        return math.hypot(a[0] + a[2] / 2 - b[0] - b[2] / 2, a[1] + a[3] / 2 - b[1] - b[3] / 2) <= thr
    raise ValueError(kind)


def random_texts(rng: random.Random, n: int, prefix: str = "t") -> list[TextSpec]:
    out = []
    for k in range(n):
        x, y = rng.uniform(0, 0.7), rng.uniform(0, 0.7)
        w, h = rng.uniform(0.05, 1 - x), rng.uniform(0.05, 1 - y)
        content = rng.choice(TEXT_POOL)
        if rng.random() < 0.3:
            content += " " + rng.choice(TEXT_POOL)
        out.append(
            TextSpec(
                f"{prefix}{k}",
                content,
                rng.choice(["title", "subtitle", "body", "caption"]),
                rng.choice(["left", "center", "right"]),
                (round(x, 3), round(y, 3), round(w, 3) if x + round(w, 3) <= 1 else round(1 - x, 3), round(h, 3) if y + round(h, 3) <= 1 else round(1 - y, 3)),
                rng.randint(0, 3),
            )
        )
    return out


def random_record(
    rng: random.Random,
    *,
    size: int = 1024,
    max_specs: int = 8,
    max_total: int = 12,
    max_relations: int = 6,
    n_texts: int = 0,
    want_directional: bool = False,
    want_occludes: bool = False,
    want_inside: bool | None = None,
    want_two_colors: bool = False,
    allow_pins: bool = True,
):
    """A satisfiable record plus its witness boxes ({instance_id: (x, y, w, h)})."""
    for _ in range(1000):
        out = _attempt(
            rng, size, max_specs, max_total, max_relations, n_texts, want_directional, want_occludes,
            want_inside, want_two_colors, allow_pins,
        )
        if out is not None:
            return out
    raise RuntimeError("generator failed")


def _attempt(rng, size, max_specs, max_total, max_relations, n_texts, want_dir, want_occ, want_inside, want_colors, allow_pins):
    W = H = size
    n_specs = rng.randint(2 if (want_dir or want_occ or want_colors) else 1, max_specs)
    total = rng.randint(n_specs, max(n_specs, max_total))
    counts = [1] * n_specs
    for _ in range(total - n_specs):
        counts[rng.randrange(n_specs)] += 1
    ids = [f"o{k}" for k in range(n_specs)]
    sizes = [rng.choice(list(SIZES)) for _ in ids]
    colors = [rng.choice(COLORS + [None]) for _ in ids]
    if want_colors:
        a, b = rng.sample(COLORS, 2)
        colors[0], colors[1] = a, b

    special = []  # (kind, subj, obj)
    singles = [k for k in range(n_specs) if counts[k] == 1]
    occ_pair = inside_pair = None
    if (want_occ or rng.random() < 0.3) and len(singles) >= 2:
        a, b = rng.sample(singles, 2)
        if sizes[a] == "large" and sizes[b] == "small":
            sizes[a] = "medium"
        occ_pair = (a, b)
        special.append(("occludes", a, b))
    if want_inside is None:
        want_inside = rng.random() < 0.25
    rest = [k for k in singles if not occ_pair or k not in occ_pair]
    if want_inside and len(rest) >= 2:
        a, b = rng.sample(rest, 2)
        sizes[a], sizes[b] = "small", rng.choice(["medium", "large"])
        inside_pair = (a, b)
        special.append(("inside", a, b))
    if want_occ and occ_pair is None:
        return None

    m = 0.04 * W
    boxes: dict[str, tuple] = {}

    def edge(k):
        return round(SIZES[sizes[k]] * min(W, H), 2)

    def free(box, skip=()):
        if box[0] < m or box[1] < m or box[0] + box[2] > W - m or box[1] + box[3] > H - m:
            return False
        return all(not _overlap(box, o) for iid, o in boxes.items() if iid not in skip)

    order = list(range(n_specs))
    rng.shuffle(order)
    # pairs first, so their partner geometry is available
    for pair, kind in ((occ_pair, "occludes"), (inside_pair, "inside")):
        if pair is None:
            continue
        a, b = pair
        ea, eb = edge(a), edge(b)
        for _ in range(200):
            bx, by = rng.uniform(m, W - m - eb), rng.uniform(m, H - m - eb)
            bb = (round(bx, 2), round(by, 2), eb, eb)
            if not free(bb):
                continue
            if kind == "inside":
                ab = (round(rng.uniform(bb[0], bb[0] + eb - ea), 2), round(rng.uniform(bb[1], bb[1] + eb - ea), 2), ea, ea)
                ab = (min(max(ab[0], bb[0]), bb[0] + eb - ea), min(max(ab[1], bb[1]), bb[1] + eb - ea), ea, ea)
                ok = free(ab)
            else:
                ab = (round(bb[0] + rng.uniform(-0.4, 0.4) * ea, 2), round(bb[1] + rng.uniform(-0.4, 0.4) * ea, 2), ea, ea)
                ok = free(ab) and _inter(ab, bb) >= 0.25 * ea * ea
            if ok:
                boxes[f"{ids[b]}#0"] = bb
                boxes[f"{ids[a]}#0"] = ab
                break
        else:
            return None
    for k in order:
        for c in range(counts[k]):
            iid = f"{ids[k]}#{c}"
            if iid in boxes:
                continue
            e = edge(k)
            for _ in range(300):
                bx = (round(rng.uniform(m, W - m - e), 2), round(rng.uniform(m, H - m - e), 2), e, e)
                if free(bx):
                    boxes[iid] = bx
                    break
            else:
                return None

    thr = 0.25 * min(W, H)
    groups = {i: [b for iid, b in boxes.items() if iid.split("#")[0] == i] for i in ids}
    candidates = []
    linked = {frozenset((ids[a], ids[b])) for _, a, b in special}
    for i in ids:
        for j in ids:
            if i == j or frozenset((i, j)) in linked:
                continue
            for kind in ("left_of", "right_of", "above", "below", "near"):
                if all(_holds(kind, a, b, thr) for a in groups[i] for b in groups[j]):
                    candidates.append((kind, i, j))
    rng.shuffle(candidates)
    n_rel = rng.randint(0, max(0, max_relations - len(special)))
    if want_dir:
        dirs = [c for c in candidates if c[0] != "near"]
        if not dirs:
            return None
        chosen = [dirs[0]] + [c for c in candidates if c != dirs[0]][: max(0, n_rel - 1)]
    else:
        chosen = candidates[:n_rel]
    rels = [RelationConstraint(k, a, b) for k, a, b in chosen]
    rels += [RelationConstraint(kind, ids[a], ids[b]) for kind, a, b in special]

    pinned = set()
    if allow_pins and rng.random() < 0.2:
        k = rng.randrange(n_specs)
        if counts[k] == 1:
            pinned.add(k)
    objects = []
    for k, oid in enumerate(ids):
        pos = None
        if k in pinned:
            bx = boxes[f"{oid}#0"]
            pos = ((bx[0] + bx[2] / 2) / W, (bx[1] + bx[3] / 2) / H)
        objects.append(
            ObjectSpec(
                oid,
                rng.choice(LABELS),
                counts[k],
                colors[k],
                sizes[k],
                rng.choice(["rect", "ellipse", "polygon", None]),
                pos,
            )
        )
    texts = random_texts(rng, n_texts)
    facts = [KnowledgeFact("fact %d" % rng.randint(0, 99), "https://example.org/%d" % k, "2026-01-01T00:00:00Z") for k in range(rng.randint(0, 2))]
    config = CanvasConfig(W, H, rng.randrange(1 << 64), rng.choice([None, "white", "blue"]))
    return make_record(config, objects, texts, rels, facts), boxes


def random_image(rng: np.random.Generator, w: int, h: int, alpha: str = "random") -> np.ndarray:
    arr = rng.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
    if alpha == "opaque":
        arr[..., 3] = 255
    elif alpha == "mixed":
        arr[..., 3] = rng.choice(np.array([0, 255, 128, 7], dtype=np.uint8), size=(h, w))
    return arr


def random_ir(rng: random.Random, max_nodes: int = 12, depth: int = 2):
    """An arbitrary well-formed IR: every node kind, nested groups, equal z values, odd ids."""
    from clawcanvas.ir import CanvasIR, CanvasNode

    W, H = rng.choice([64, 512, 1024, 1920]), rng.choice([64, 512, 1080])
    counter = iter(range(10_000))

    def coord(limit):
        return round(rng.uniform(0, limit), 2)

    def node(level):
        nid = rng.choice(["n", "obj#", "a&b", 'q"', "x:y", "节点"]) + str(next(counter))
        kind = rng.choice(["rect", "ellipse", "polygon", "text"] + (["group"] if level < depth else []))
        label = rng.choice([None, "apple", "cup & saucer", "<b>"])
        color = rng.choice([None] + COLORS)
        z = rng.randint(-2, 5)
        if kind in ("rect", "ellipse"):
            x, y = coord(W - 1), coord(H - 1)
            box = (x, y, max(round(rng.uniform(0, W - x), 2), 0.01), max(round(rng.uniform(0, H - y), 2), 0.01))
            return CanvasNode(nid, kind, z, label, color, box)
        if kind == "polygon":
            pts = tuple((coord(W), coord(H)) for _ in range(rng.randint(3, 7)))
            return CanvasNode(nid, kind, z, label, color, points=pts)
        if kind == "text":
            return CanvasNode(
                nid, "text", z, label, color, anchor=(coord(W), coord(H)),
                size_class=rng.choice(["title", "subtitle", "body", "caption"]),
                alignment=rng.choice(["left", "center", "right"]), content=rng.choice(TEXT_POOL),
            )
        kids = tuple(node(level + 1) for _ in range(rng.randint(0, 3)))
        return CanvasNode(nid, "group", z, label, color, children=kids)

    return CanvasIR(W, H, tuple(node(0) for _ in range(rng.randint(0, max_nodes))))


def random_layerdoc(rng: random.Random, width: int = 40, height: int = 32, n_layers: int = 4, with_background: bool = True):
    """An in-memory LayerDoc: random payloads, offsets partly off-canvas, masks and opacities."""
    from clawcanvas.layers import Image, Layer, LayerDoc, Mask, SolidFill

    np_rng = np.random.default_rng(rng.randrange(1 << 32))
    layers = []
    z = 0
    if with_background:
        layers.append(Layer("bg", z, SolidFill(tuple(rng.randrange(256) for _ in range(3)) + (255,)), name="background"))
    for k in range(n_layers):
        z += rng.randint(1, 3)
        w, h = rng.randint(1, width // 2), rng.randint(1, height // 2)
        if rng.random() < 0.3:
            payload = SolidFill(tuple(rng.randrange(256) for _ in range(4)), (w, h))
        else:
            payload = Image(random_image(np_rng, w, h, rng.choice(["random", "opaque", "mixed"])))
        mask = Mask(np_rng.random((h, w)) < 0.7) if rng.random() < 0.4 else None
        layers.append(
            Layer(
                f"l{k}", z, payload, name=f"layer {k}",
                opacity=rng.choice([0.0, 0.25, 0.5, 0.7, 1.0, round(rng.random(), 3)]),
                offset=(rng.randint(-w // 2, width - w // 2), rng.randint(-h // 2, height - h // 2)),
                mask=mask,
            )
        )
    return LayerDoc(width, height, tuple(layers))


def random_edit(rng: random.Random, doc, targets=None):
    from clawcanvas.layers import Delete, Image, Recolor, Reorder, ReplacePayload, SetOpacity, SolidFill, Translate

    lid = rng.choice(targets or [ly.id for ly in doc.layers])
    kind = rng.choice(["translate", "set_opacity", "recolor", "delete", "reorder", "replace_payload"])
    if kind == "translate":
        return Translate(lid, rng.randint(-6, 6), rng.randint(-6, 6))
    if kind == "set_opacity":
        return SetOpacity(lid, rng.choice([0.0, 0.3, 0.5, 1.0]))
    if kind == "recolor":
        if rng.random() < 0.5:
            return Recolor(lid, hue_rotation=rng.choice([30.0, 90.0, 120.0, 200.0]))
        return Recolor(lid, target=rng.choice(COLORS))
    if kind == "delete":
        return Delete(lid)
    if kind == "reorder":
        zs = [ly.z for ly in doc.layers]
        return Reorder(lid, rng.randint(min(zs) - 1, max(zs) + 1))
    old = doc.layer(lid)
    shape = old.payload.rgba.shape[:2] if isinstance(old.payload, Image) else None
    if old.mask is not None and shape is not None:
        # keep payload dimensions so the mask still fits
        arr = random_image(np.random.default_rng(rng.randrange(1 << 32)), shape[1], shape[0])
        return ReplacePayload(lid, Image(arr))
    if old.mask is not None:
        return ReplacePayload(lid, SolidFill(tuple(rng.randrange(256) for _ in range(4)), old.payload.size))
    return ReplacePayload(lid, SolidFill(tuple(rng.randrange(256) for _ in range(4)), (rng.randint(1, 12), rng.randint(1, 12))))
