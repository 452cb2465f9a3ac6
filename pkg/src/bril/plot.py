"""Deterministic SVG scatter of a 2-D behavioral space.

Points are coloured by cluster, noise is black, and each cluster centroid is
drawn as an open circle with its id.
"""
from __future__ import annotations

import numpy as np

from .clustering import NOISE, centroids

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)
NOISE_COLOR = "#000000"
SIZE = 600
MARGIN = 40


def cluster_color(label: int) -> str:
    return NOISE_COLOR if label == NOISE else PALETTE[label % len(PALETTE)]


def scatter_svg(points, labels, title: str = "behavioral space") -> str:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int64)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/>',
    ]
    if len(pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        inner = SIZE - 2 * MARGIN

        def xy(p):
            u = (p - lo) / span
            return MARGIN + u[0] * inner, SIZE - MARGIN - u[1] * inner

        # noise first so clusters draw on top
        order = sorted(range(len(pts)), key=lambda i: (labels[i] != NOISE, i))
        for i in order:
            x, y = xy(pts[i])
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{cluster_color(int(labels[i]))}"/>')
        for c, cen in sorted(centroids(pts, labels).items()):
            x, y = xy(cen)
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="9" fill="none" stroke="{NOISE_COLOR}" '
                       f'stroke-width="2"/>')
            out.append(f'<text x="{x + 11:.2f}" y="{y - 11:.2f}" font-size="12" '
                       f'font-family="sans-serif">{c}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
