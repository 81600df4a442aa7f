"""RGBA8 images and boolean masks, loaded from PNG or the raw format.

Raw files start with a 16-byte header (width, height as little-endian u64)
followed by row-major RGBA8 samples.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from ..errors import ClawCanvasError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
RAW_HEADER = struct.Struct("<QQ")


class ImageFormatError(ClawCanvasError):
    pass


class Image:
    """An RGBA8 image held as a (height, width, 4) uint8 array."""

    __slots__ = ("rgba",)

    def __init__(self, rgba):
        arr = np.asarray(rgba, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValueError(f"expected an (h, w, 4) array, got shape {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        self.rgba = arr

    @property
    def width(self) -> int:
        return self.rgba.shape[1]

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @classmethod
    def blank(cls, width: int, height: int, color=(0, 0, 0, 0)) -> "Image":
        arr = np.empty((height, width, 4), dtype=np.uint8)
        arr[:] = color
        return cls(arr)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.rgba.shape == other.rgba.shape and bool(np.array_equal(self.rgba, other.rgba))

    __hash__ = None

    def __repr__(self):
        return f"Image({self.width}x{self.height})"


class Mask:
    """A boolean grid, (height, width)."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D grid, got shape {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        self.bits = arr

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None

    def __repr__(self):
        return f"Mask({self.width}x{self.height}, {int(self.bits.sum())} set)"


def decode_raw(data: bytes) -> np.ndarray:
    if len(data) < RAW_HEADER.size:
        raise ImageFormatError("raw image shorter than its header")
    w, h = RAW_HEADER.unpack_from(data)
    if len(data) != RAW_HEADER.size + 4 * w * h:
        raise ImageFormatError(f"raw image of {w}x{h} needs {4 * w * h} sample bytes")
    return np.frombuffer(data, dtype=np.uint8, offset=RAW_HEADER.size).reshape(h, w, 4)


def encode_raw(img: Image) -> bytes:
    return RAW_HEADER.pack(img.width, img.height) + img.rgba.tobytes()


def _decode_png(data: bytes, mode: str) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return np.array(im.convert(mode))
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"unreadable PNG: {exc}") from None


def decode_image(data: bytes) -> Image:
    if data.startswith(PNG_SIGNATURE):
        return Image(_decode_png(data, "RGBA"))
    return Image(decode_raw(data))


def encode_png(img: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(np.ascontiguousarray(img.rgba), "RGBA").save(buf, format="PNG")
    return buf.getvalue()


def load_image(path: str | Path) -> Image:
    return decode_image(Path(path).read_bytes())


def save_image(img: Image, path: str | Path) -> None:
    """PNG unless the suffix is ``.raw``."""
    path = Path(path)
    path.write_bytes(encode_raw(img) if path.suffix == ".raw" else encode_png(img))


def decode_mask(data: bytes) -> Mask:
    """Grayscale PNG (or raw, red channel) thresholded at 128."""
    if data.startswith(PNG_SIGNATURE):
        return Mask(_decode_png(data, "L") >= 128)
    return Mask(decode_raw(data)[:, :, 0] >= 128)


def load_mask(path: str | Path) -> Mask:
    return decode_mask(Path(path).read_bytes())


def save_mask(mask: Mask, path: str | Path) -> None:
    path = Path(path)
    gray = np.where(mask.bits, 255, 0).astype(np.uint8)
    if path.suffix == ".raw":
        rgba = np.repeat(gray[:, :, None], 4, axis=2)
        path.write_bytes(encode_raw(Image(rgba)))
        return
    buf = io.BytesIO()
    PILImage.fromarray(gray, "L").save(buf, format="PNG")
    path.write_bytes(buf.getvalue())
