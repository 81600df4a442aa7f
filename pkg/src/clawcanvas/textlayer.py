"""HTML/CSS text layers and text extraction from emitted documents."""

from __future__ import annotations

from html.parser import HTMLParser

from .errors import ClawCanvasError
from .ir import FONT_PX
from .records import SceneRecord
from .svg import svg_texts


class NoTextContent(ClawCanvasError):
    def __init__(self):
        super().__init__("record has no text specs")


class MalformedHtml(ClawCanvasError):
    pass


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _esc_attr(s: str) -> str:
    return _esc(s).replace('"', "&quot;")


def _px(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def emit_html_text_layer(record: SceneRecord) -> bytes:
    if not record.texts:
        raise NoTextContent()
    W, H = record.canvas.width, record.canvas.height
    lines = [
        "<!DOCTYPE html>",
        '<html lang="und">',
        "<head>",
        '<meta charset="utf-8">',
        "<title>text layer</title>",
        "<style>",
        "body{margin:0}",
        f".canvas{{position:relative;width:{W}px;height:{H}px;overflow:hidden}}",
        ".t{position:absolute;margin:0;box-sizing:border-box;white-space:pre-wrap}",
        "</style>",
        "</head>",
        "<body>",
        '<div class="canvas">',
    ]
    for t in sorted(record.texts, key=lambda t: t.id):
        x, y, w, h = t.region
        style = (
            f"left:{_px(x * W)}px;top:{_px(y * H)}px;width:{_px(w * W)}px;height:{_px(h * H)}px;"
            f"font-size:{FONT_PX[t.size_class]}px;text-align:{t.alignment}"
        )
        lines.append(
            f'<div class="t" id="{_esc_attr(t.id)}" data-level="{t.level}" data-size="{t.size_class}" '
            f'style="{style}">{_esc(t.content)}</div>'
        )
    lines += ["</div>", "</body>", "</html>"]
    return ("\n".join(lines) + "\n").encode("utf-8")


class _BlockCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self._depth = 0
        self._buf: list[str] | None = None

    def handle_starttag(self, tag, attrs):
        if self._buf is not None:
            raise MalformedHtml(f"unexpected <{tag}> inside a text block")
        if tag == "div" and ("class", "t") in attrs:
            self._buf = []

    def handle_endtag(self, tag):
        if self._buf is not None and tag == "div":
            self.blocks.append("".join(self._buf))
            self._buf = None

    def handle_data(self, data):
        if self._buf is not None:
            self._buf.append(data)


def html_texts(data: bytes | str) -> list[str]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    p = _BlockCollector()
    p.feed(data)
    p.close()
    if p._buf is not None:
        raise MalformedHtml("unterminated text block")
    return p.blocks


def extract_text(document: bytes | str, format: str) -> list[str]:
    """All text contents of an emitted document, in document order, unescaped."""
    if format == "svg":
        return svg_texts(document)
    if format == "html":
        return html_texts(document)
    raise ValueError(f"unknown format {format!r}")
