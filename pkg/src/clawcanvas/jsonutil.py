"""Canonical JSON helpers: sorted keys, UTF-8, optional fixed-point floats."""

from __future__ import annotations

import json
import math
from typing import Any


def dumps_line(obj: Any) -> str:
    """Compact single-line JSON with sorted keys; non-ASCII kept verbatim."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps_fixed(obj: Any, decimals: int = 2, indent: int = 2) -> str:
    """Pretty JSON with sorted keys where every float prints with exactly `decimals` places.

    Infinite floats render as the string ``"inf"`` so the output stays valid JSON.
    """
    return _emit(obj, decimals, indent, 0) + "\n"


def _emit(obj: Any, decimals: int, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, float):
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        if math.isnan(obj):
            raise ValueError("NaN is not serializable")
        text = f"{obj:.{decimals}f}"
        if text.startswith("-") and float(text) == 0.0:
            text = text[1:]
        return text
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_emit(obj[k], decimals, indent, level + 1)}"
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_emit(v, decimals, indent, level + 1) for v in obj) + "]"
        items = [pad + _emit(v, decimals, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
