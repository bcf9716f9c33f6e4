"""Deterministic CSV and self-contained SVG emission.

Numbers are written with 17 significant digits and '.' decimals so identical
configurations produce byte-identical CSV files; SVG figures are plain
matplotlib output with a fixed hash salt and embed no external assets.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

__all__ = ["fmt", "write_csv", "new_figure", "save_svg"]


def fmt(value) -> str:
    """Render one CSV cell: floats at 17 significant digits, rest as str."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, header, rows) -> Path:
    """Write rows of cells under a header; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(fmt(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def new_figure(width: float = 6.4, height: float = 4.8) -> Figure:
    """Figure bound to the SVG canvas, independent of any global backend."""
    fig = Figure(figsize=(width, height))
    FigureCanvasSVG(fig)
    return fig


def save_svg(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "cylmap"}):
        fig.savefig(path, format="svg")
    return path
