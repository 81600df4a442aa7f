"""PSNR and SSIM restricted to a boolean region.

SSIM runs on BT.601 luma with an 11x11 Gaussian window (sigma 1.5).  Only
windows lying inside the region's bounding box and at least 95% covered by
the region are scored, and window statistics are weighted by the region
(Gaussian weights times mask, renormalized), so pixels outside the region
never leak in.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ClawCanvasError
from .composite import DimensionMismatch
from .image import Image, Mask

WINDOW = 11
SIGMA = 1.5
K1, K2, L = 0.01, 0.03, 255.0
MIN_COVERAGE = 0.95
LUMA = np.array([0.299, 0.587, 0.114])


class MetricError(ClawCanvasError):
    pass


class EmptyMask(MetricError):
    def __init__(self):
        super().__init__("mask selects no pixels")


class RegionTooSmall(MetricError):
    def __init__(self, detail: str):
        super().__init__(f"region too small for SSIM: {detail}")


def _arr(x) -> np.ndarray:
    return x.rgba if isinstance(x, Image) else np.asarray(x)


def _mask(m) -> np.ndarray:
    return m.bits if isinstance(m, Mask) else np.asarray(m, dtype=bool)


def _prepare(a, b, mask):
    a, b, m = _arr(a), _arr(b), _mask(mask)
    if a.shape != b.shape:
        raise DimensionMismatch("images", f"{a.shape[:2]} vs {b.shape[:2]}")
    if m.shape != a.shape[:2]:
        raise DimensionMismatch("mask", f"{m.shape} vs image {a.shape[:2]}")
    if not m.any():
        raise EmptyMask()
    return a, b, m


def psnr(a, b, mask) -> float:
    """10*log10(255^2 / MSE) over the masked RGB samples; math.inf when identical."""
    a, b, m = _prepare(a, b, mask)
    d = a[m][:, :3].astype(np.float64) - b[m][:, :3].astype(np.float64)
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    """1-D normalized Gaussian taps; the 2-D window is their outer product."""
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2 * sigma * sigma))
    return g / g.sum()


def luma(rgba: np.ndarray) -> np.ndarray:
    return rgba[..., :3].astype(np.float64) @ LUMA


def _valid_filter(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable 'valid' correlation with the outer-product window g x g."""
    n = len(g)
    rows = sum(g[k] * x[k : x.shape[0] - n + 1 + k, :] for k in range(n))
    return sum(g[k] * rows[:, k : x.shape[1] - n + 1 + k] for k in range(n))


def ssim(a, b, mask) -> float:
    a, b, m = _prepare(a, b, mask)
    ys, xs = np.nonzero(m)
    y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    if y1 - y0 < WINDOW or x1 - x0 < WINDOW:
        raise RegionTooSmall(f"bounding box {x1 - x0}x{y1 - y0} is under {WINDOW}x{WINDOW}")
    x = luma(a[y0:y1, x0:x1])
    y = luma(b[y0:y1, x0:x1])
    w = m[y0:y1, x0:x1].astype(np.float64)

    g = gaussian_window()
    ones = np.ones(WINDOW)
    coverage = _valid_filter(w, ones) / (WINDOW * WINDOW)
    valid = coverage >= MIN_COVERAGE - 1e-12
    if not valid.any():
        raise RegionTooSmall(f"no {WINDOW}x{WINDOW} window is {MIN_COVERAGE:.0%} covered")

    sw = np.where(valid, _valid_filter(w, g), 1.0)  # discarded windows may carry no weight
    mx = _valid_filter(w * x, g) / sw
    my = _valid_filter(w * y, g) / sw
    sxx = _valid_filter(w * x * x, g) / sw - mx * mx
    syy = _valid_filter(w * y * y, g) / sw - my * my
    sxy = _valid_filter(w * x * y, g) / sw - mx * my

    c1, c2 = (K1 * L) ** 2, (K2 * L) ** 2
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean((num / den)[valid]))
