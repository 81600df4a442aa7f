"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the code under test, except for plain data types.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# --- graphs -------------------------------------------------------------------------


def has_cycle(edges) -> bool:
    """Reachability closure: a cycle exists iff some node reaches itself."""
    nodes = sorted({n for e in edges for n in e})
    reach = {n: set() for n in nodes}
    for a, b in edges:
        reach[a].add(b)
    changed = True
    while changed:
        changed = False
        for n in nodes:
            extra = set().union(*(reach[m] for m in reach[n])) - reach[n] if reach[n] else set()
            if extra:
                reach[n] |= extra
                changed = True
    return any(n in reach[n] for n in nodes)


# --- compositing --------------------------------------------------------------------


def _round_half_up(q: Fraction) -> int:
    return math.floor(q + Fraction(1, 2))


def over_pixel(dst, src, opacity: float, covered: bool = True):
    """One un-premultiplied 8-bit alpha-over step, in exact rationals."""
    op8 = _round_half_up(Fraction(repr(float(opacity))) * 255)  # opacity as written in decimal
    sa = _round_half_up(Fraction(src[3] * op8, 255)) if covered else 0
    da = dst[3]
    num = sa * 255 + da * (255 - sa)
    if num == 0:
        return (0, 0, 0, 0)
    out = [_round_half_up(Fraction(src[c] * sa * 255 + dst[c] * da * (255 - sa), num)) for c in range(3)]
    return (*out, _round_half_up(Fraction(num, 255)))


def composite_oracle(width, height, layers):
    """layers: list of (rgba array (h, w, 4), opacity, (dx, dy), mask or None), back to front."""
    out = [[(0, 0, 0, 0)] * width for _ in range(height)]
    for px, opacity, (dx, dy), mask in layers:
        h, w = px.shape[:2]
        for y in range(height):
            for x in range(width):
                lx, ly = x - dx, y - dy
                if not (0 <= lx < w and 0 <= ly < h):
                    continue
                covered = True if mask is None else bool(mask[ly, lx])
                out[y][x] = over_pixel(out[y][x], tuple(int(v) for v in px[ly, lx]), opacity, covered)
    return np.array(out, dtype=np.uint8).reshape(height, width, 4)


# --- metrics ------------------------------------------------------------------------


def psnr_oracle(a, b, mask) -> float:
    total, n = 0, 0
    h, w = mask.shape
    for y in range(h):
        for x in range(w):
            if mask[y][x]:
                for c in range(3):
                    d = int(a[y][x][c]) - int(b[y][x][c])
                    total += d * d
                    n += 1
    if total == 0:
        return math.inf
    return 10 * math.log10(255**2 / (total / n))


def ssim_oracle(a, b, mask, size=11, sigma=1.5, coverage=0.95) -> float:
    """Sliding-window SSIM with explicit per-window loops and mask-weighted moments."""
    def lum(img, y, x):
        r, g, bl = (float(v) for v in img[y][x][:3])
        return 0.299 * r + 0.587 * g + 0.114 * bl

    half = (size - 1) / 2
    g1 = [math.exp(-((k - half) ** 2) / (2 * sigma * sigma)) for k in range(size)]
    s = sum(g1)
    g1 = [v / s for v in g1]
    ys = [y for y in range(mask.shape[0]) if mask[y].any()]
    xs = [x for x in range(mask.shape[1]) if mask[:, x].any()]
    y0, y1, x0, x1 = min(ys), max(ys) + 1, min(xs), max(xs) + 1
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    vals = []
    for top in range(y0, y1 - size + 1):
        for left in range(x0, x1 - size + 1):
            cells = [(top + i, left + j, g1[i] * g1[j]) for i in range(size) for j in range(size)]
            inside = sum(1 for yy, xx, _ in cells if mask[yy][xx])
            if inside < coverage * size * size - 1e-9:
                continue
            wsum = sum(wt for yy, xx, wt in cells if mask[yy][xx])
            mx = sum(wt * lum(a, yy, xx) for yy, xx, wt in cells if mask[yy][xx]) / wsum
            my = sum(wt * lum(b, yy, xx) for yy, xx, wt in cells if mask[yy][xx]) / wsum
            vx = sum(wt * (lum(a, yy, xx) - mx) ** 2 for yy, xx, wt in cells if mask[yy][xx]) / wsum
            vy = sum(wt * (lum(b, yy, xx) - my) ** 2 for yy, xx, wt in cells if mask[yy][xx]) / wsum
            cov = sum(wt * (lum(a, yy, xx) - mx) * (lum(b, yy, xx) - my) for yy, xx, wt in cells if mask[yy][xx]) / wsum
            vals.append(((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


# --- physics ------------------------------------------------------------------------


def projectile_range(H: float, h: float, g: float = 9.81, dt: float = 1e-5) -> float:
    """Integrate the jet leaving the wall at speed sqrt(2g(H-h)) until it reaches y = 0."""
    vx = math.sqrt(2 * g * (H - h))
    x, y, vy = 0.0, h, 0.0
    while True:
        # velocity Verlet under constant gravity
        ny = y + vy * dt - 0.5 * g * dt * dt
        if ny <= 0.0:
            # solve y + vy*t - g t^2/2 = 0 for the remaining fraction of the step
            t = (vy + math.sqrt(vy * vy + 2 * g * y)) / g
            return x + vx * t
        x += vx * dt
        y = ny
        vy -= g * dt
