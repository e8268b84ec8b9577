"""Binary-mask geometry: contours, centroids, anchor points, feature sampling.

Coordinate convention used everywhere in this package: pixel centers sit at
integer ``(x, y)`` with x growing rightward and y growing downward, so a
W x H image covers the physical rectangle ``[-0.5, W-0.5] x [-0.5, H-0.5]``.
Masks are boolean numpy arrays indexed ``mask[y, x]``. "Counter-clockwise"
means positive shoelace area in these coordinates, i.e. the angle about an
interior point increases from +x toward +y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, InvalidCountError, OutOfBoundsError


@dataclass(eq=False)
class Contour:
    """Ordered boundary pixels of one connected component.

    ``points`` is an (n, 2) integer array of (x, y) rows. The polyline is
    implicitly closed: the segment from the last point back to the first is
    part of the outline.
    """

    points: np.ndarray
    closed: bool = True

    def __len__(self) -> int:
        return len(self.points)

    def perimeter(self) -> float:
        if len(self.points) < 2:
            return 0.0
        closed_pts = np.vstack([self.points, self.points[:1]]).astype(float)
        return float(np.sum(np.linalg.norm(np.diff(closed_pts, axis=0), axis=1)))


@dataclass(eq=False)
class AnchorSet:
    """Points sampled on an object outline plus the object's mask centroid."""

    anchors: np.ndarray  # (m, 2) float, (x, y) rows
    centroid: tuple[float, float]

    @property
    def m(self) -> int:
        return len(self.anchors)


# Moore neighbourhood, clockwise starting at the north-west neighbour.
_NBRS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def _trace_boundary(comp: np.ndarray) -> list[tuple[int, int]]:
    """Moore boundary trace of a single 8-connected component.

    Returns boundary pixels as (y, x) tuples in walk order. Termination uses
    the revisit criterion: stop when the walk is back at the start pixel and
    about to repeat its first move, which handles one-pixel spurs correctly.
    """
    ys, xs = np.nonzero(comp)
    start = (int(ys[0]), int(xs[0]))  # row-major scan: topmost, then leftmost
    path: list[tuple[int, int]] = []
    p, b = start, 0
    first_dir = None
    h, w = comp.shape
    for _ in range(4 * comp.size + 4):
        path.append(p)
        idx = None
        for i in range(8):
            j = (b + i) % 8
            qy, qx = p[0] + _NBRS[j][0], p[1] + _NBRS[j][1]
            if 0 <= qy < h and 0 <= qx < w and comp[qy, qx]:
                idx = j
                break
        if idx is None:
            break  # isolated pixel
        if p == start:
            if first_dir is None:
                first_dir = idx
            elif idx == first_dir and len(path) > 1:
                path.pop()  # back at the start and about to cycle
                break
        p = (p[0] + _NBRS[idx][0], p[1] + _NBRS[idx][1])
        b = (idx + 5) % 8  # restart scan one past the backtrack direction
    return path


def extract_contour(mask: np.ndarray) -> Contour:
    """Trace the outer boundary of the largest connected component.

    Parameters
    ----------
    mask : (H, W) bool array
        Foreground occupancy. Must contain at least one true pixel.

    Returns
    -------
    Contour
        Boundary pixels in counter-clockwise order (positive shoelace area in
        the y-down convention), starting at the topmost-then-leftmost boundary
        pixel. Interior holes are ignored. Ties between equally large
        components go to the first in scan order.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMaskError("mask has no foreground pixel")
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n > 1:
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        comp = labels == int(np.argmax(sizes))
    else:
        comp = labels > 0
    walk = _trace_boundary(comp)
    pts = np.array([(x, y) for y, x in walk], dtype=np.int64).reshape(-1, 2)
    if len(pts) > 2:
        x, y = pts[:, 0].astype(float), pts[:, 1].astype(float)
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area2 < 0:
            pts = np.vstack([pts[:1], pts[1:][::-1]])
    return Contour(points=pts)


def centroid(mask: np.ndarray) -> tuple[float, float]:
    """Mean (x, y) of all true pixels of the full mask, every component."""
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyMaskError("mask has no foreground pixel")
    return float(xs.mean()), float(ys.mean())


def sample_anchors(contour: Contour, m: int, center: tuple[float, float]) -> AnchorSet:
    """Place m points at equal arc-length spacing along the closed contour.

    Parameters
    ----------
    contour : Contour
        Outline polyline; the walk starts at its first point.
    m : int
        Number of anchors, at least 1.
    center : (x, y)
        Centroid of the originating mask, carried on the result.

    Returns
    -------
    AnchorSet
        Anchor k sits at arc length ``k * perimeter / m`` from the contour's
        first point. A single-point contour yields m copies of that point.
    """
    if m < 1:
        raise InvalidCountError(f"need at least one anchor, got {m}")
    if len(contour.points) == 0:
        raise EmptyMaskError("contour has no points")
    pts = contour.points.astype(float)
    if len(pts) == 1:
        anchors = np.repeat(pts, m, axis=0)
        return AnchorSet(anchors=anchors, centroid=(float(center[0]), float(center[1])))
    closed_pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed_pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        anchors = np.repeat(pts[:1], m, axis=0)
        return AnchorSet(anchors=anchors, centroid=(float(center[0]), float(center[1])))
    t = np.arange(m) * (total / m)
    idx = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(seg) - 1)
    frac = (t - cum[idx]) / seg[idx]
    anchors = closed_pts[idx] + frac[:, None] * (closed_pts[idx + 1] - closed_pts[idx])
    return AnchorSet(anchors=anchors, centroid=(float(center[0]), float(center[1])))


def anchors_from_mask(mask: np.ndarray, m: int) -> AnchorSet:
    """Contour, centroid and anchor sampling in one step."""
    return sample_anchors(extract_contour(mask), m, centroid(mask))


def _bilinear_many(fmap: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear samples of a (H, W, C) map at float positions, shape (n, C)."""
    h, w = fmap.shape[:2]
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]
    v00 = fmap[y0, x0]
    v01 = fmap[y0, x1]
    v10 = fmap[y1, x0]
    v11 = fmap[y1, x1]
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)


def sample_feature(fmap: np.ndarray, p: tuple[float, float]) -> np.ndarray:
    """Bilinearly interpolated feature vector at a continuous (x, y) point.

    Exact at integer coordinates. Raises OutOfBoundsError outside the grid of
    pixel centers ``[0, W-1] x [0, H-1]``.
    """
    fmap = np.asarray(fmap)
    if fmap.ndim != 3:
        raise OutOfBoundsError("feature map must be (H, W, C)")
    h, w = fmap.shape[:2]
    x, y = float(p[0]), float(p[1])
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise OutOfBoundsError(f"point ({x}, {y}) outside [0, {w - 1}] x [0, {h - 1}]")
    return _bilinear_many(fmap, np.array([x]), np.array([y]))[0]


def region_mean_feature(fmap: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Mean feature over a mask whose grid maps onto the feature map.

    The region grid is scaled onto the map with align-corners mapping, so a
    region pixel center (x, y) lands at ``(x * (Wf-1)/(Wr-1), y * (Hf-1)/(Hr-1))``;
    a singleton region dimension maps to the map's midpoint. When the region
    and map share a shape the mapping is the identity.
    """
    fmap = np.asarray(fmap)
    region = np.asarray(region, dtype=bool)
    ys, xs = np.nonzero(region)
    if len(xs) == 0:
        raise EmptyMaskError("region has no foreground pixel")
    h, w = fmap.shape[:2]
    rh, rw = region.shape
    if rw > 1:
        px = xs * ((w - 1) / (rw - 1))
    else:
        px = np.full(len(xs), (w - 1) / 2.0)
    if rh > 1:
        py = ys * ((h - 1) / (rh - 1))
    else:
        py = np.full(len(ys), (h - 1) / 2.0)
    return _bilinear_many(fmap, px, py).mean(axis=0)


def grid_partition_features(
    fmap: np.ndarray, s: int, n: int, seed: int
) -> list[np.ndarray]:
    """Mean-pool an s x s partition of the map and pick n cells at random.

    Cells are formed by splitting rows and columns into s nearly equal slices
    (sizes differ by at most one) and are ordered row-major. Selection draws n
    cell indices without replacement from numpy's seeded default generator
    (PCG64), so a given seed always returns the same cells in the same order.
    With ``n == s * s`` the result is a permutation of all cell means.
    """
    fmap = np.asarray(fmap)
    h, w = fmap.shape[:2]
    if s < 1 or s > min(h, w):
        raise InvalidCountError(f"grid size {s} does not fit a {h}x{w} map")
    if not (1 <= n <= s * s):
        raise InvalidCountError(f"cannot pick {n} cells from an {s}x{s} grid")
    row_bounds = np.linspace(0, h, s + 1).astype(int)
    col_bounds = np.linspace(0, w, s + 1).astype(int)
    cells = []
    for gy in range(s):
        for gx in range(s):
            block = fmap[row_bounds[gy] : row_bounds[gy + 1], col_bounds[gx] : col_bounds[gx + 1]]
            cells.append(block.reshape(-1, fmap.shape[2]).mean(axis=0))
    rng = np.random.default_rng(seed)
    picks = rng.choice(s * s, size=n, replace=False)
    return [cells[int(i)] for i in picks]
