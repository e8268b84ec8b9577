"""Polar shape-position descriptors for masked objects.

An object's descriptor is a u x v polar histogram of its outline anchors,
taken about the mask centroid: u angle sectors of width 2*pi/u starting at the
+x axis, v radius rings of width r_max/v. Bin values are anchor counts scaled
by 1/sqrt(d_model); bins whose center point fails the configured membership
test are overwritten with -1/sqrt(d_model), which is what makes the descriptor
sensitive to where the object sits, not just its silhouette. The grid is
flattened angle-major and linearly resampled to d_model entries so it can be
added to a query embedding of the same width.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import mask_geometry
from .errors import (
    ConfigMismatchError,
    EmptyAnchorsError,
    MissingContextError,
    ZeroReferenceError,
)

_GRID_EXTENTS = ("object_scale", "image_scale")
_NEGATIVE_MODES = ("image_bounds", "target_mask", "mask_union")


@dataclass(frozen=True)
class DescriptorConfig:
    """Histogram geometry and membership rules.

    u, v
        Angle and radius bin counts.
    d_model
        Width of the resampled descriptor; must match the query embeddings it
        will be added to.
    grid_extent
        "object_scale": r_max = radius_margin * max anchor radius (scale
        invariant). "image_scale": r_max = radius_margin * image diagonal / 2
        (location sensitive through the margin ring).
    radius_margin
        Multiplier >= 1 that pads the outer ring so near-border bins can go
        negative.
    negative_mode
        Membership test for bin centers: inside the image rectangle
        ("image_bounds"), inside the object's own mask ("target_mask"), or
        inside the union of the object and supplied context masks
        ("mask_union").
    """

    u: int = 36
    v: int = 12
    d_model: int = 256
    grid_extent: str = "object_scale"
    radius_margin: float = 1.25
    negative_mode: str = "image_bounds"

    def __post_init__(self) -> None:
        if self.u < 2:
            raise ValueError(f"need at least 2 angle bins, got {self.u}")
        if self.v < 1:
            raise ValueError(f"need at least 1 radius bin, got {self.v}")
        if self.d_model < 1:
            raise ValueError(f"d_model must be positive, got {self.d_model}")
        if self.radius_margin < 1.0:
            raise ValueError(f"radius_margin must be >= 1, got {self.radius_margin}")
        if self.grid_extent not in _GRID_EXTENTS:
            raise ValueError(f"unknown grid_extent {self.grid_extent!r}")
        if self.negative_mode not in _NEGATIVE_MODES:
            raise ValueError(f"unknown negative_mode {self.negative_mode!r}")


@dataclass(eq=False)
class ShapePositionDescriptor:
    """One object's polar histogram plus its embedding-width resample."""

    hist: np.ndarray = field(repr=False)  # (u, v), angle-major rows
    r_max: float
    center: tuple[float, float]
    embedded: np.ndarray = field(repr=False)  # (d_model,)

    @property
    def u(self) -> int:
        return self.hist.shape[0]

    @property
    def v(self) -> int:
        return self.hist.shape[1]

    @property
    def d_model(self) -> int:
        return len(self.embedded)


def _resample_1d(flat: np.ndarray, n_out: int) -> np.ndarray:
    # Linear interpolation over normalized positions; identity when lengths match.
    n_in = len(flat)
    if n_in == 1:
        return np.full(n_out, float(flat[0]))
    src = np.linspace(0.0, 1.0, n_in)
    dst = np.linspace(0.0, 1.0, n_out)
    return np.interp(dst, src, flat)


def build_descriptor(
    anchors: mask_geometry.AnchorSet,
    mask: np.ndarray,
    context_masks: Sequence[np.ndarray] | None = None,
    cfg: DescriptorConfig = DescriptorConfig(),
) -> ShapePositionDescriptor:
    """Bin outline anchors into the polar grid about the mask centroid.

    Parameters
    ----------
    anchors : AnchorSet
        Outline points plus centroid, normally from sample_anchors.
    mask : (H, W) bool array
        The object's own mask; supplies the image frame and the target-mask
        membership test.
    context_masks : sequence of (H, W) bool arrays, optional
        Required when cfg.negative_mode is "mask_union".
    cfg : DescriptorConfig

    Notes
    -----
    Binning is floor division into half-open cells, so an anchor exactly on a
    boundary belongs to the higher bin; an anchor on the centroid has angle 0
    and lands in bin (0, 0). Anchors at radius >= r_max are dropped. Negative
    marking runs last and overwrites any counts in failing bins.
    """
    pts = np.asarray(anchors.anchors, dtype=float)
    if pts.size == 0:
        raise EmptyAnchorsError("anchor set is empty")
    if cfg.negative_mode == "mask_union" and context_masks is None:
        raise MissingContextError("mask_union negative mode needs context masks")
    mask = np.asarray(mask, dtype=bool)
    h_img, w_img = mask.shape
    cx, cy = anchors.centroid

    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    theta = np.where(theta < 0, theta + 2 * np.pi, theta)

    if cfg.grid_extent == "object_scale":
        r_max = cfg.radius_margin * float(r.max())
    else:
        r_max = cfg.radius_margin * float(np.hypot(w_img, h_img)) / 2.0

    d_theta = 2 * np.pi / cfg.u
    scale = 1.0 / np.sqrt(cfg.d_model)
    counts = np.zeros((cfg.u, cfg.v), dtype=np.int64)
    if r_max > 0:
        d_r = r_max / cfg.v
        keep = r < r_max
        ti = np.floor(theta[keep] / d_theta).astype(int) % cfg.u
        ri = np.floor(r[keep] / d_r).astype(int)
        ri = np.minimum(ri, cfg.v - 1)  # absorb roundoff at the top edge
        np.add.at(counts, (ti, ri), 1)
        ring_r = (np.arange(cfg.v) + 0.5) * d_r
    else:
        # every anchor coincides with the centroid
        counts[0, 0] = len(pts)
        ring_r = np.zeros(cfg.v)

    hist = counts.astype(float) * scale

    sector_t = (np.arange(cfg.u) + 0.5) * d_theta
    bx = cx + ring_r[None, :] * np.cos(sector_t)[:, None]
    by = cy + ring_r[None, :] * np.sin(sector_t)[:, None]
    if cfg.negative_mode == "image_bounds":
        inside = (
            (bx >= -0.5) & (bx < w_img - 0.5) & (by >= -0.5) & (by < h_img - 0.5)
        )
    else:
        if cfg.negative_mode == "target_mask":
            probe = mask
        else:
            probe = mask.copy()
            for cm in context_masks:
                probe |= np.asarray(cm, dtype=bool)
        px = np.rint(bx).astype(int)
        py = np.rint(by).astype(int)
        valid = (px >= 0) & (px < w_img) & (py >= 0) & (py < h_img)
        inside = np.zeros_like(valid)
        inside[valid] = probe[py[valid], px[valid]]
    hist[~inside] = -scale

    embedded = _resample_1d(hist.reshape(-1), cfg.d_model)
    return ShapePositionDescriptor(
        hist=hist, r_max=r_max, center=(float(cx), float(cy)), embedded=embedded
    )


def descriptor_from_mask(
    mask: np.ndarray,
    m: int = 200,
    context_masks: Sequence[np.ndarray] | None = None,
    cfg: DescriptorConfig = DescriptorConfig(),
) -> ShapePositionDescriptor:
    """Contour, anchors and histogram in one step."""
    anchors = mask_geometry.anchors_from_mask(mask, m)
    return build_descriptor(anchors, np.asarray(mask, dtype=bool), context_masks, cfg)


def delta_h(h_t: ShapePositionDescriptor, h_tn: ShapePositionDescriptor) -> float:
    """Relative histogram change, normalized by the FIRST argument's norm.

    Deliberately asymmetric: the first argument is the reference (earlier)
    descriptor and its norm sits in the denominator.
    """
    if h_t.hist.shape != h_tn.hist.shape or h_t.d_model != h_tn.d_model:
        raise ConfigMismatchError(
            f"histogram grids disagree: {h_t.hist.shape} vs {h_tn.hist.shape}"
        )
    ref = float(np.linalg.norm(h_t.hist))
    if ref == 0.0:
        raise ZeroReferenceError("reference histogram has zero norm")
    return float(np.linalg.norm(h_tn.hist - h_t.hist)) / ref


def is_positive_pair(
    h_t: ShapePositionDescriptor, h_tn: ShapePositionDescriptor, tau: float = 0.2
) -> bool:
    """True when the change ratio is strictly below tau; tau exactly is negative."""
    return delta_h(h_t, h_tn) < tau
