"""Self-contained SVG renderings: heatmaps, curves, basis tiles.

Plain string assembly keeps the plots dependency-light, diffable, and
byte-deterministic; the CSV/JSON companions remain the primary record.
Every figure carries a provenance footer (basis id, mode, bins, epsilon).
"""

from __future__ import annotations

from typing import Dict, Sequence

import numpy as np

CELL = 46
LABEL_SPACE = 130
FONT = "font-family=\"Helvetica, Arial, sans-serif\""


def esc(s) -> str:
    return (
        str(s)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def fmt(v: float) -> str:
    return f"{float(v):.6g}"


def _ramp(t: float) -> str:
    """White -> deep blue, linear in t within [0, 1]."""
    t = min(1.0, max(0.0, t))
    r = int(round(255 + (33 - 255) * t))
    g = int(round(255 + (102 - 255) * t))
    b = int(round(255 + (172 - 255) * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def _text(x, y, s, size=11, anchor="middle", color="#222", extra="") -> str:
    return (
        f'<text x="{fmt(x)}" y="{fmt(y)}" {FONT} font-size="{size}" '
        f'text-anchor="{anchor}" fill="{color}" {extra}>{esc(s)}</text>'
    )


def _provenance_footer(width: int, y: int, provenance: str) -> str:
    return _text(width / 2, y, provenance, size=9, color="#666")


def heatmap_svg(labels: Sequence[str], values: np.ndarray, title: str, provenance: str) -> str:
    """Annotated matrix heatmap with a linear per-matrix color scale."""
    k = len(labels)
    width = LABEL_SPACE + k * CELL + 20
    height = 60 + k * CELL + 40
    vmin = float(values.min())
    vmax = float(values.max())
    span = vmax - vmin
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<desc>{esc(provenance)}</desc>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        _text(width / 2, 24, title, size=14, extra='font-weight="bold"'),
    ]
    x0, y0 = LABEL_SPACE, 50
    for j, label in enumerate(labels):
        parts.append(
            f'<g transform="translate({fmt(x0 + j * CELL + CELL / 2)},{fmt(y0 - 6)}) rotate(-40)">'
            + _text(0, 0, label, size=10, anchor="start")
            + "</g>"
        )
    for i, label in enumerate(labels):
        parts.append(_text(x0 - 6, y0 + i * CELL + CELL / 2 + 4, label, size=10, anchor="end"))
        for j in range(k):
            v = float(values[i][j])
            t = 0.0 if span == 0 else (v - vmin) / span
            parts.append(
                f'<rect x="{fmt(x0 + j * CELL)}" y="{fmt(y0 + i * CELL)}" width="{CELL}" '
                f'height="{CELL}" fill="{_ramp(t)}" stroke="#ccc" stroke-width="0.5"/>'
            )
            parts.append(
                _text(
                    x0 + j * CELL + CELL / 2,
                    y0 + i * CELL + CELL / 2 + 3,
                    fmt(v),
                    size=8,
                    color="#000" if t < 0.6 else "#fff",
                )
            )
    parts.append(_provenance_footer(width, y0 + k * CELL + 24, provenance))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart_svg(
    series: Dict[str, tuple],
    title: str,
    x_label: str,
    y_label: str,
    provenance: str,
    y_range: tuple = None,
) -> str:
    """Simple multi-series line chart; series maps label -> (xs, ys)."""
    width, height = 640, 420
    mx, my = 70, 60
    plot_w, plot_h = width - 2 * mx - 120, height - 2 * my
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = (min(all_y), max(all_y)) if y_range is None else y_range
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi == y_lo:
        y_hi = y_lo + 1

    def px(x):
        return mx + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return my + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    palette = ["#2166ac", "#b2182b", "#1b7837", "#e08214", "#762a83",
               "#35978f", "#c51b7d", "#8c510a", "#4d4d4d", "#80b1d3"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<desc>{esc(provenance)}</desc>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        _text(width / 2, 26, title, size=14, extra='font-weight="bold"'),
        f'<rect x="{mx}" y="{my}" width="{fmt(plot_w)}" height="{fmt(plot_h)}" '
        f'fill="none" stroke="#999"/>',
        _text(mx + plot_w / 2, height - 18, x_label, size=11),
        f'<g transform="translate(18,{fmt(my + plot_h / 2)}) rotate(-90)">'
        + _text(0, 0, y_label, size=11)
        + "</g>",
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(_text(mx - 8, py(yv) + 4, fmt(yv), size=9, anchor="end"))
        xv = x_lo + frac * (x_hi - x_lo)
        parts.append(_text(px(xv), my + plot_h + 16, fmt(xv), size=9))
    for idx, (label, (xs, ys)) in enumerate(series.items()):
        color = palette[idx % len(palette)]
        points = " ".join(f"{fmt(px(x))},{fmt(py(y))}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = my + 14 + idx * 16
        parts.append(
            f'<line x1="{width - 170}" y1="{ly - 4}" x2="{width - 150}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(_text(width - 144, ly, label, size=10, anchor="start"))
    parts.append(_provenance_footer(width, height - 4, provenance))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def basis_grid_svg(mean: np.ndarray, components: np.ndarray, ratios: np.ndarray,
                   title: str, provenance: str) -> str:
    """Mean filter and the nine components rendered as 3x3 weight tiles."""
    tile = 66
    cell = tile // 3
    pad = 16
    tiles = [("mean", np.asarray(mean))] + [
        (f"v{i + 1} ({fmt(float(ratios[i] * 100))}%)", np.asarray(components[i]))
        for i in range(len(components))
    ]
    cols = 5
    rows = (len(tiles) + cols - 1) // cols
    width = pad + cols * (tile + pad) + pad
    height = 50 + rows * (tile + 34) + 24
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<desc>{esc(provenance)}</desc>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        _text(width / 2, 24, title, size=14, extra='font-weight="bold"'),
    ]
    for idx, (label, grid) in enumerate(tiles):
        gx = pad + (idx % cols) * (tile + pad) + pad / 2
        gy = 44 + (idx // cols) * (tile + 34)
        peak = float(np.abs(grid).max()) or 1.0
        for c in range(9):
            v = float(grid[c]) / peak  # in [-1, 1]
            if v >= 0:
                color = _ramp(v)
            else:
                r = int(round(255 + (178 - 255) * -v))
                g = int(round(255 + (24 - 255) * -v))
                b = int(round(255 + (43 - 255) * -v))
                color = f"#{r:02x}{g:02x}{b:02x}"
            parts.append(
                f'<rect x="{fmt(gx + (c % 3) * cell)}" y="{fmt(gy + (c // 3) * cell)}" '
                f'width="{cell}" height="{cell}" fill="{color}" stroke="#bbb" stroke-width="0.5"/>'
            )
        parts.append(_text(gx + tile / 2, gy + tile + 14, label, size=9))
    parts.append(_provenance_footer(width, height - 6, provenance))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
