"""Deterministic SVG scatter/hull rendering.

Byte-identical output for identical input: fixed canvas, fixed decimal
formatting, no timestamps.  Used for the fish, rotation sets and chamber
spectra; three-dimensional chamber data is first projected onto the
trace-zero plane.
"""

from __future__ import annotations

import math

import numpy as np

CANVAS = 640
MARGIN = 60


def project_trace_zero(points, atol: float = 1e-6) -> np.ndarray:
    """Project 3D chamber vectors with coordinate sum 0 onto the plane.

    Uses the orthonormal basis u = (1,-1,0)/sqrt(2), v = (1,1,-2)/sqrt(6);
    raises if any input has |x + y + z| > atol.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValueError("expected 3D points")
    sums = pts.sum(axis=1)
    if np.any(np.abs(sums) > atol):
        raise ValueError(f"points leave the trace-zero plane by {np.abs(sums).max()}")
    u = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)
    v = np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0)
    return np.column_stack([pts @ u, pts @ v])


def hull_cycle_order(points) -> list[int]:
    """Indices of 2D points in counterclockwise order around their centroid."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 0:
        return []
    center = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    return [int(i) for i in np.lexsort((pts[:, 0], pts[:, 1], ang))]


def _fmt(x: float) -> str:
    return format(x, ".6f")


def render_svg(points, hull, path: str, *, title: str = "") -> str:
    """Write a scatter plot with an optional hull polyline; returns the text.

    `points` and `hull` are sequences of 2-vectors; an empty point list
    still produces a valid picture with axes only.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    hl = np.asarray(list(hull), dtype=float).reshape(-1, 2)
    data = np.vstack([pts, hl]) if len(pts) + len(hl) else np.zeros((0, 2))
    if len(data):
        lo = data.min(axis=0)
        hi = data.max(axis=0)
    else:
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    span = np.maximum(hi - lo, 1e-9)
    lo = lo - 0.05 * span
    hi = hi + 0.05 * span
    span = hi - lo
    scale = (CANVAS - 2 * MARGIN) / span.max()

    def xy(p):
        return (MARGIN + (p[0] - lo[0]) * scale,
                CANVAS - MARGIN - (p[1] - lo[1]) * scale)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" '
        f'height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]
    if title:
        lines.append(f'<text x="{MARGIN}" y="30" font-family="monospace" '
                     f'font-size="14">{title}</text>')
    # axes through the origin when visible, otherwise frame only
    lines.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{CANVAS - 2 * MARGIN}" '
                 f'height="{CANVAS - 2 * MARGIN}" fill="none" stroke="#cccccc"/>')
    if lo[0] <= 0.0 <= hi[0]:
        x0, _ = xy((0.0, lo[1]))
        lines.append(f'<line x1="{_fmt(x0)}" y1="{MARGIN}" x2="{_fmt(x0)}" '
                     f'y2="{CANVAS - MARGIN}" stroke="#aaaaaa" stroke-dasharray="4 3"/>')
    if lo[1] <= 0.0 <= hi[1]:
        _, y0 = xy((lo[0], 0.0))
        lines.append(f'<line x1="{MARGIN}" y1="{_fmt(y0)}" x2="{CANVAS - MARGIN}" '
                     f'y2="{_fmt(y0)}" stroke="#aaaaaa" stroke-dasharray="4 3"/>')
    for corner, anchor in (((lo[0], lo[1]), "start"), ((hi[0], hi[1]), "end")):
        cx, cy = xy(corner)
        lines.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy + 36)}" font-family="monospace" '
                     f'font-size="11" text-anchor="{anchor}">'
                     f'({_fmt(corner[0])}, {_fmt(corner[1])})</text>')
    if len(hl) >= 2:
        coords = " ".join(f"{_fmt(xy(p)[0])},{_fmt(xy(p)[1])}"
                          for p in np.vstack([hl, hl[:1]]))
        lines.append(f'<polyline points="{coords}" fill="#dde7f5" '
                     f'fill-opacity="0.6" stroke="#3465a4" stroke-width="1.5"/>')
    for p in pts:
        cx, cy = xy(p)
        lines.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" '
                     f'fill="#cc0000" fill-opacity="0.8"/>')
    lines.append("</svg>")
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
