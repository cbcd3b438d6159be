"""Minimal deterministic SVG line charts for trace CSVs.

No plotting dependency: panels are fixed-size polylines with axis labels,
emitted as plain text so identical inputs give byte-identical files.
"""

from __future__ import annotations

import numpy as np

PANEL_W = 360
PANEL_H = 150
MARGIN = 42


def _poly(t, y, x0, y0):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tmin, tmax = float(t[0]), float(t[-1])
    ymin, ymax = float(np.min(y)), float(np.max(y))
    if tmax == tmin:
        tmax = tmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad
    # decimate long traces; the panels are only a few hundred pixels wide
    stride = max(1, t.size // (2 * PANEL_W))
    idx = np.arange(0, t.size, stride)
    if idx[-1] != t.size - 1:
        idx = np.append(idx, t.size - 1)
    pts = []
    for k in idx:
        px = x0 + (t[k] - tmin) / (tmax - tmin) * PANEL_W
        py = y0 + PANEL_H - (y[k] - ymin) / (ymax - ymin) * PANEL_H
        pts.append(f"{px:.2f},{py:.2f}")
    return " ".join(pts), ymin, ymax


def render_panels(t, channels: dict, title: str = "") -> str:
    """One stacked panel per channel, shared time axis."""
    names = list(channels)
    width = PANEL_W + 2 * MARGIN
    height = MARGIN + len(names) * (PANEL_H + MARGIN)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="11">',
        f'<text x="{MARGIN}" y="{MARGIN - 24}" font-size="13">{title}</text>',
    ]
    for row, name in enumerate(names):
        x0 = MARGIN
        y0 = MARGIN + row * (PANEL_H + MARGIN)
        points, ymin, ymax = _poly(t, channels[name], x0, y0)
        parts += [
            f'<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" '
            'fill="none" stroke="#999"/>',
            f'<polyline points="{points}" fill="none" stroke="#1f5fa8" '
            'stroke-width="1.2"/>',
            f'<text x="{x0}" y="{y0 - 5}">{name}</text>',
            f'<text x="{x0 + PANEL_W + 4}" y="{y0 + 10}">{ymax:.6g}</text>',
            f'<text x="{x0 + PANEL_W + 4}" y="{y0 + PANEL_H}">{ymin:.6g}</text>',
        ]
        if row == len(names) - 1:
            parts += [
                f'<text x="{x0}" y="{y0 + PANEL_H + 16}">t = {t[0]:.6g} s</text>',
                f'<text x="{x0 + PANEL_W - 80}" y="{y0 + PANEL_H + 16}">'
                f't = {t[-1]:.6g} s</text>',
            ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
