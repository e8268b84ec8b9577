"""Shared fixtures and mask builders."""

from __future__ import annotations

import numpy as np


def disc_mask(w: int, h: int, cx: float, cy: float, r: float) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r


def rect_mask(w: int, h: int, x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    """Axis-aligned rectangle, inclusive corners."""
    mask = np.zeros((h, w), dtype=bool)
    mask[y0 : y1 + 1, x0 : x1 + 1] = True
    return mask


def convex_polygon_mask(w: int, h: int, verts: np.ndarray) -> np.ndarray:
    """Pixel centers inside the convex hull of verts (counterclockwise)."""
    ys, xs = np.mgrid[0:h, 0:w]
    inside = np.ones((h, w), dtype=bool)
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cross = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        inside &= cross >= 0
    return inside


def random_convex_polygon(rng: np.random.Generator, cx: float, cy: float, r_lo: float, r_hi: float, n: int) -> np.ndarray:
    """Convex vertex loop: sorted angles on a random ellipse."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=n))
    a = rng.uniform(r_lo, r_hi)
    b = rng.uniform(r_lo, r_hi)
    xs = cx + a * np.cos(angles)
    ys = cy + b * np.sin(angles)
    return np.stack([xs, ys], axis=1)
