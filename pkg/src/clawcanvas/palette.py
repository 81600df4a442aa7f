"""The closed 10-colour palette shared by records, canvases and the verifier."""

from __future__ import annotations

PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (255, 0, 0),
    "green": (0, 128, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "purple": (128, 0, 128),
    "orange": (255, 165, 0),
    "pink": (255, 192, 203),
    "brown": (165, 42, 42),
    "black": (0, 0, 0),
    "white": (255, 255, 255),
}

_BY_HEX = {"#%02x%02x%02x" % rgb: name for name, rgb in PALETTE.items()}


def is_color(name: object) -> bool:
    return isinstance(name, str) and name in PALETTE


def rgb(name: str) -> tuple[int, int, int]:
    return PALETTE[name]


def to_hex(name: str) -> str:
    return "#%02x%02x%02x" % PALETTE[name]


def from_hex(value: str) -> str | None:
    """Map ``#rrggbb`` back to a palette name, or None when off-palette."""
    return _BY_HEX.get(value.lower())
