"""Deterministic code-as-brush toolchain: scene records to verifiable canvases."""

__version__ = "0.1.0"
