"""Dependency-free SVG scatter plots of 2-D datasets, with optional decision shading."""

from __future__ import annotations

import colorsys
from html import escape

import numpy as np

from .dataset import Dataset, DatasetError
from .ensemble import EnsembleModel

GRID = 100
SIZE = 600
PAD = 40


def bounds(X: np.ndarray, margin: float = 0.05) -> tuple[float, float, float, float]:
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo = lo - margin * span
    hi = hi + margin * span
    return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])


def decision_grid(model: EnsembleModel, box, grid: int = GRID) -> np.ndarray:
    """Ensemble flags at cell centers; ``out[row, col]`` with row 0 at the lowest y."""
    x0, x1, y0, y1 = box
    xs = x0 + (np.arange(grid) + 0.5) * (x1 - x0) / grid
    ys = y0 + (np.arange(grid) + 0.5) * (y1 - y0) / grid
    gx, gy = np.meshgrid(xs, ys)
    flags = model.flags(np.column_stack([gx.ravel(), gy.ravel()]))
    return flags.reshape(grid, grid)


def cell_of(point, box, grid: int = GRID) -> tuple[int, int]:
    """(row, col) of the grid cell containing ``point``."""
    x0, x1, y0, y1 = box
    col = int(np.clip(np.floor((point[0] - x0) / (x1 - x0) * grid), 0, grid - 1))
    row = int(np.clip(np.floor((point[1] - y0) / (y1 - y0) * grid), 0, grid - 1))
    return row, col


def _color(i: int, n: int) -> str:
    r, g, b = colorsys.hls_to_rgb((i * 0.618033988749895) % 1.0, 0.45, 0.75)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def render_svg(data: Dataset, model: EnsembleModel | None = None, comment: str = "") -> str:
    """Negatives as triangles, positives as circles, one hue per subject."""
    if data.dim != 2:
        raise DatasetError(f"plotting needs 2-D data, got dimension {data.dim}")
    box = bounds(data.X)
    x0, x1, y0, y1 = box
    inner = SIZE - 2 * PAD

    def px(x):
        return PAD + (x - x0) / (x1 - x0) * inner

    def py(y):
        return PAD + (y1 - y) / (y1 - y0) * inner

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
    ]
    if comment:
        out.append(f"<!-- {escape(comment).replace('--', '- -')} -->")
    out.append(f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>')
    if model is not None:
        grid = decision_grid(model, box)
        cw = inner / GRID
        out.append('<g class="regions" fill="#f4c27a" fill-opacity="0.5">')
        for row in range(GRID):
            for col in range(GRID):
                if grid[row, col]:
                    x = PAD + col * cw
                    y = PAD + (GRID - 1 - row) * cw
                    out.append(
                        f'<rect class="region" data-row="{row}" data-col="{col}" '
                        f'x="{x:.3f}" y="{y:.3f}" width="{cw:.3f}" height="{cw:.3f}"/>'
                    )
        out.append("</g>")
    out.append(f'<rect x="{PAD}" y="{PAD}" width="{inner}" height="{inner}" fill="none" stroke="#444"/>')

    subjects = list(dict.fromkeys(data.subject_ids))
    hue = {s: _color(i, len(subjects)) for i, s in enumerate(subjects)}
    out.append('<g class="markers" stroke="#222" stroke-width="0.5">')
    for sid, lab, (x, y) in zip(data.subject_ids, data.y, data.X):
        cx, cy = px(x), py(y)
        if lab:
            out.append(f'<circle class="marker positive" cx="{cx:.3f}" cy="{cy:.3f}" r="4" fill="{hue[sid]}"/>')
        else:
            pts = f"{cx:.3f},{cy - 5:.3f} {cx - 4.5:.3f},{cy + 4:.3f} {cx + 4.5:.3f},{cy + 4:.3f}"
            out.append(f'<polygon class="marker negative" points="{pts}" fill="{hue[sid]}"/>')
    out.append("</g>")
    names = [escape(n) for n in data.feature_names]
    out.append(f'<text x="{SIZE / 2:.1f}" y="{SIZE - 10}" text-anchor="middle" font-size="14">{names[0]}</text>')
    out.append(
        f'<text x="14" y="{SIZE / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 14 {SIZE / 2:.1f})">{names[1]}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
