"""Deterministic synthetic scenes with exact ground truth.

Shapes (ellipse, rectangle, polygon) follow per-frame placements of
(cx, cy, rotation, scale) and rasterize by testing whether each pixel center
(integer coordinates) lies inside the transformed outline. Later objects in
the list occlude earlier ones, so per-frame visible masks are pairwise
disjoint by construction. Embeddings are ``prototype + sigma * noise`` with
noise from numpy's default generator (PCG64) seeded by the scene seed and
consumed frame-major then object-minor, which makes whole scenes byte-stable
across runs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .association import QueryRecord, TrackSet
from .descriptor import DescriptorConfig, descriptor_from_mask
from .errors import DegenerateShapeError, UnknownTrackError

SHAPES = ("ellipse", "rectangle", "polygon")


@dataclass(frozen=True)
class ObjectSpec:
    """One object: base outline centered at the origin plus its placements.

    params is (semi_x, semi_y) for an ellipse, (width, height) for a
    rectangle, or a tuple of (x, y) vertices for a polygon. trajectory holds
    one (cx, cy, rotation, scale) placement per frame, rotation in radians.
    """

    shape: str
    params: tuple
    trajectory: tuple[tuple[float, float, float, float], ...]
    embedding_prototype: tuple[float, ...]
    kind: str = "thing"
    class_id: int | None = None
    embedding_noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.kind == "stuff" and self.class_id is None:
            raise ValueError("stuff objects must carry a class_id")
        if self.embedding_noise_sigma < 0:
            raise ValueError("noise sigma must be nonnegative")


@dataclass(frozen=True)
class SceneSpec:
    """A full scene: canvas, frame count, object list, seed.

    Trajectories must keep every object clear of the image border unless
    border_test is set. Stuff objects need pairwise distinct class ids (one
    semantic region per class; per-frame unions of several regions are not
    representable as single records).
    """

    width: int
    height: int
    frames: int
    objects: tuple[ObjectSpec, ...]
    seed: int = 0
    border_test: bool = False

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise ValueError("scene needs positive width, height and frames")
        for k, obj in enumerate(self.objects):
            if len(obj.trajectory) != self.frames:
                raise ValueError(
                    f"object {k} has {len(obj.trajectory)} placements for "
                    f"{self.frames} frames"
                )
        stuff_classes = [o.class_id for o in self.objects if o.kind == "stuff"]
        if len(stuff_classes) != len(set(stuff_classes)):
            raise ValueError("stuff objects must have distinct class ids")


@dataclass(eq=False)
class SceneTruth:
    """Generated masks, records, and the ground-truth track set."""

    spec: SceneSpec
    masks: dict[str, np.ndarray]
    records: list[QueryRecord]
    tracks: TrackSet
    track_of_object: tuple[int, ...]  # object index -> ground-truth track id


def mask_ref_name(frame: int, obj: int) -> str:
    return f"f{frame:04d}_o{obj:02d}"


def _points_in_polygon(px: np.ndarray, py: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, boundary-inclusive enough for rasterization."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < np.where(crosses, xint, np.inf))
    return inside


def _rasterize(
    obj: ObjectSpec, placement: tuple[float, float, float, float], w: int, h: int
) -> np.ndarray:
    cx, cy, rot, scale = placement
    if scale <= 0:
        raise DegenerateShapeError(f"nonpositive scale {scale}")
    xs, ys = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    # inverse transform of each pixel center into the shape frame
    dx = (xs - cx) / scale
    dy = (ys - cy) / scale
    c, s = np.cos(-rot), np.sin(-rot)
    ux = c * dx - s * dy
    uy = s * dx + c * dy
    if obj.shape == "ellipse":
        a, b = obj.params
        inside = (ux / a) ** 2 + (uy / b) ** 2 <= 1.0
    elif obj.shape == "rectangle":
        bw, bh = obj.params
        inside = (np.abs(ux) <= bw / 2) & (np.abs(uy) <= bh / 2)
    else:
        verts = np.asarray(obj.params, dtype=float)
        inside = _points_in_polygon(ux, uy, verts)
    return inside


def generate(spec: SceneSpec) -> SceneTruth:
    """Rasterize all frames and attach seeded embeddings.

    Raises DegenerateShapeError when an outline covers no pixel or when a
    later object fully occludes an earlier one. Without border_test, an
    outline touching the image border also raises: ground truth near borders
    is only meaningful when asked for explicitly.
    """
    w, h = spec.width, spec.height
    rng = np.random.default_rng(spec.seed)
    masks: dict[str, np.ndarray] = {}
    records: list[QueryRecord] = []
    assignments: list[tuple[int, int, QueryRecord]] = []

    kinds = {o.kind for o in spec.objects}
    if kinds == {"thing"} or not spec.objects:
        mode = "instance"
    elif kinds == {"stuff"}:
        mode = "semantic"
    else:
        mode = "panoptic"

    track_ids = []
    next_thing = 0
    for obj in spec.objects:
        if obj.kind == "thing":
            track_ids.append(next_thing)
            next_thing += 1
        else:
            track_ids.append(
                int(obj.class_id) if mode == "semantic" else -(1 + int(obj.class_id))
            )

    protos = [np.asarray(o.embedding_prototype, dtype=float) for o in spec.objects]
    widths = {len(p) for p in protos}
    if len(widths) > 1:
        raise ValueError(f"embedding prototypes disagree in width: {sorted(widths)}")

    for frame in range(spec.frames):
        raw = []
        for k, obj in enumerate(spec.objects):
            inside = _rasterize(obj, obj.trajectory[frame], w, h)
            if not inside.any():
                raise DegenerateShapeError(f"object {k} covers no pixel at frame {frame}")
            if not spec.border_test:
                edge = (
                    inside[0].any() or inside[-1].any()
                    or inside[:, 0].any() or inside[:, -1].any()
                )
                if edge:
                    raise DegenerateShapeError(
                        f"object {k} touches the border at frame {frame}; "
                        "set border_test to allow this"
                    )
            raw.append(inside)
        occluders = np.zeros((h, w), dtype=bool)
        visible = [None] * len(raw)
        for k in range(len(raw) - 1, -1, -1):  # later objects sit on top
            visible[k] = raw[k] & ~occluders
            occluders |= raw[k]
        for k, obj in enumerate(spec.objects):
            if not visible[k].any():
                raise DegenerateShapeError(
                    f"object {k} is fully occluded at frame {frame}"
                )
            noise = rng.standard_normal(len(protos[k]))
            emb = protos[k] + obj.embedding_noise_sigma * noise
            ref = mask_ref_name(frame, k)
            masks[ref] = visible[k]
            rec = QueryRecord(
                embedding=emb,
                frame=frame,
                mask_ref=ref,
                kind=obj.kind,
                class_id=obj.class_id,
            )
            records.append(rec)
            assignments.append((track_ids[k], frame, rec))

    tracks = TrackSet.from_assignments(mode, assignments)
    return SceneTruth(
        spec=spec,
        masks=masks,
        records=records,
        tracks=tracks,
        track_of_object=tuple(track_ids),
    )


def attach_descriptors(
    truth: SceneTruth,
    cfg: DescriptorConfig = DescriptorConfig(),
    m: int = 200,
) -> SceneTruth:
    """Return a copy of the scene whose records all carry descriptors."""
    context = None
    if cfg.negative_mode == "mask_union":
        context = list(truth.masks.values())
    new_records = {}
    for rec in truth.records:
        desc = descriptor_from_mask(truth.masks[rec.mask_ref], m=m, context_masks=context, cfg=cfg)
        new_records[rec.mask_ref] = dataclasses.replace(rec, descriptor=desc)
    return _rebuild(truth, new_records)


def inject_identity_swap(truth: SceneTruth, frame: int, a: int, b: int) -> SceneTruth:
    """Swap two tracks' embedding streams from a frame onward; masks stay put.

    Both tracks must have a record at the switch frame. At every frame >= the
    switch where both exist, the records trade embeddings; frames where only
    one exists keep their own. Descriptors stay with the masks.
    """
    for tid in (a, b):
        if not any(f == frame for f, _ in truth.tracks.tracks.get(tid, [])):
            raise UnknownTrackError(f"track {tid} has no record at frame {frame}")
    by_frame_a = {f: rec for f, rec in truth.tracks.tracks[a] if f >= frame}
    by_frame_b = {f: rec for f, rec in truth.tracks.tracks[b] if f >= frame}
    new_records = {}
    for f in set(by_frame_a) & set(by_frame_b):
        ra, rb = by_frame_a[f], by_frame_b[f]
        new_records[ra.mask_ref] = dataclasses.replace(ra, embedding=rb.embedding)
        new_records[rb.mask_ref] = dataclasses.replace(rb, embedding=ra.embedding)
    return _rebuild(truth, new_records)


def _rebuild(truth: SceneTruth, replaced: dict[str, QueryRecord]) -> SceneTruth:
    """New SceneTruth with some records replaced, track structure preserved."""
    records = [replaced.get(r.mask_ref, r) for r in truth.records]
    assignments = []
    for tid, frame, rec in truth.tracks.records():
        assignments.append((tid, frame, replaced.get(rec.mask_ref, rec)))
    tracks = TrackSet.from_assignments(truth.tracks.mode, assignments)
    return SceneTruth(
        spec=truth.spec,
        masks=truth.masks,
        records=records,
        tracks=tracks,
        track_of_object=truth.track_of_object,
    )


# -- convenience builders used by demos and tests ---------------------------


def linear_trajectory(
    start: tuple[float, float],
    velocity: tuple[float, float],
    frames: int,
    rotation: float = 0.0,
    spin: float = 0.0,
    scale: float = 1.0,
    growth: float = 0.0,
) -> tuple[tuple[float, float, float, float], ...]:
    """Constant-velocity placements with optional per-frame spin and growth."""
    return tuple(
        (
            start[0] + velocity[0] * t,
            start[1] + velocity[1] * t,
            rotation + spin * t,
            scale + growth * t,
        )
        for t in range(frames)
    )


def orthogonal_prototypes(n: int, d_model: int, norm: float = 1.0) -> list[tuple[float, ...]]:
    """n pairwise-orthogonal embedding prototypes of the given norm."""
    if n > d_model:
        raise ValueError(f"cannot fit {n} orthogonal vectors in width {d_model}")
    protos = []
    for i in range(n):
        v = np.zeros(d_model)
        v[i] = norm
        protos.append(tuple(v))
    return protos
