"""Query records, affinity, optimal assignment, and track stepping.

A track set is a single-owner mutable object: one tracker loop feeds it frames
in order. Matching between the previous frame's track heads and the new
frame's records maximizes total cosine affinity of ``embedding + descriptor``
sums (or embeddings alone with use_spa off). Assignment ties are broken toward
the lexicographically smallest (row, column) pair list so reruns are
bit-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import mask_geometry
from .descriptor import ShapePositionDescriptor
from .errors import (
    DimensionMismatchError,
    FrameOrderError,
    MissingBankError,
    MissingDescriptorError,
    ModeMismatchError,
)

KINDS = ("thing", "stuff")
MODES = ("instance", "semantic", "panoptic")


@dataclass(frozen=True, eq=False)
class QueryRecord:
    """One detected object in one frame: embedding, mask reference, labels."""

    embedding: np.ndarray = field(repr=False)
    frame: int
    mask_ref: str
    kind: str = "thing"
    class_id: int | None = None
    descriptor: ShapePositionDescriptor | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")


@dataclass(frozen=True)
class MatchConfig:
    """Tracker knobs: descriptor use, accept floor, unmatched-record policy."""

    use_spa: bool = True
    affinity_floor: float = 0.0
    new_track_policy: str = "spawn"  # or "drop"

    def __post_init__(self) -> None:
        if self.new_track_policy not in ("spawn", "drop"):
            raise ValueError(f"unknown new_track_policy {self.new_track_policy!r}")


def _query_matrix(records: Sequence[QueryRecord], use_spa: bool) -> np.ndarray:
    dims = {len(r.embedding) for r in records}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mixed embedding widths {sorted(dims)}")
    rows = []
    for r in records:
        q = np.asarray(r.embedding, dtype=float)
        if use_spa:
            if r.descriptor is None:
                raise MissingDescriptorError(f"record {r.mask_ref!r} has no descriptor")
            if r.descriptor.d_model != len(q):
                raise DimensionMismatchError(
                    f"descriptor width {r.descriptor.d_model} vs embedding {len(q)}"
                )
            q = q + r.descriptor.embedded
        rows.append(q)
    return np.stack(rows)


def spa_affinity(
    a: Sequence[QueryRecord], b: Sequence[QueryRecord], use_spa: bool = True
) -> np.ndarray:
    """Pairwise cosine affinity between two record lists.

    With use_spa the compared vectors are ``embedding + descriptor.embedded``;
    without it, embeddings alone. A zero vector has cosine 0 against
    everything by convention. Returns a (len(a), len(b)) float matrix.
    """
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    qa = _query_matrix(a, use_spa)
    qb = _query_matrix(b, use_spa)
    if qa.shape[1] != qb.shape[1]:
        raise DimensionMismatchError(f"widths {qa.shape[1]} vs {qb.shape[1]}")
    na = np.linalg.norm(qa, axis=1)
    nb = np.linalg.norm(qb, axis=1)
    qa = np.where(na[:, None] > 0, qa / np.where(na == 0, 1, na)[:, None], 0.0)
    qb = np.where(nb[:, None] > 0, qb / np.where(nb == 0, 1, nb)[:, None], 0.0)
    return qa @ qb.T


def _assignment_total(values: Sequence[float]) -> float:
    # fsum keeps totals independent of summation order, so tie checks are exact
    return math.fsum(values)


def _best_completion(matrix: np.ndarray) -> float:
    if matrix.shape[0] == 0 or matrix.shape[1] == 0:
        return 0.0
    ri, ci = linear_sum_assignment(matrix, maximize=True)
    return _assignment_total(matrix[ri, ci].tolist())


def hungarian(affinity: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-total-affinity one-to-one assignment, canonical under ties.

    Returns min(rows, cols) pairs sorted by row. Among all assignments with
    maximal total, the lexicographically smallest pair list is returned, which
    pins down behavior on degenerate matrices (identical embeddings, constant
    affinity). The optimum value comes from scipy; the canonical pair list is
    rebuilt by fixing pairs in lexicographic order and testing that an optimal
    completion still exists. That costs extra assignment solves, a fair trade
    at tracking scene sizes.
    """
    a = np.asarray(affinity, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"affinity must be 2-d, got shape {a.shape}")
    n_rows, n_cols = a.shape
    k = min(n_rows, n_cols)
    if k == 0:
        return []
    ri, ci = linear_sum_assignment(a, maximize=True)
    best = _assignment_total(a[ri, ci].tolist())
    tol = 1e-12 * max(1.0, float(np.abs(a).max()))

    pairs: list[tuple[int, int]] = []
    fixed: list[float] = []
    cols_free = list(range(n_cols))
    row_lo = 0
    remaining = k
    while remaining > 0:
        placed = False
        for row in range(row_lo, n_rows - remaining + 1):
            for col in cols_free:
                sub_cols = [c for c in cols_free if c != col]
                sub = a[np.ix_(range(row + 1, n_rows), sub_cols)]
                need = remaining - 1
                if need > min(sub.shape):
                    continue
                total = _assignment_total(
                    fixed + [float(a[row, col])]
                ) + _best_completion(sub)
                if total >= best - tol:
                    pairs.append((row, col))
                    fixed.append(float(a[row, col]))
                    cols_free.remove(col)
                    row_lo = row + 1
                    remaining -= 1
                    placed = True
                    break
            if placed:
                break
        if not placed:  # pragma: no cover - optimum is always completable
            raise RuntimeError("assignment canonicalization failed")
    return pairs


class TrackSet:
    """Mutable collection of tracks, advanced one frame at a time.

    tracks maps track_id to a list of (frame, record) entries with strictly
    increasing frames. Tracks never retire: an unmatched track simply gains no
    record that frame and stays eligible later. In semantic mode track ids are
    class ids; in panoptic mode stuff tracks are keyed -(1 + class_id) so they
    cannot collide with spawned thing ids.

    Single-owner: nothing here is safe for concurrent mutation.
    """

    def __init__(self, mode: str = "instance"):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.tracks: dict[int, list[tuple[int, QueryRecord]]] = {}
        self.next_id = 0

    # -- bookkeeping -------------------------------------------------------

    @classmethod
    def from_assignments(
        cls, mode: str, items: Sequence[tuple[int, int, QueryRecord]]
    ) -> "TrackSet":
        """Build directly from (track_id, frame, record) triples (ground truth)."""
        ts = cls(mode)
        for tid, frame, rec in sorted(items, key=lambda t: (t[1], t[0])):
            ts.tracks.setdefault(tid, []).append((frame, rec))
        for tid, entries in ts.tracks.items():
            frames = [f for f, _ in entries]
            if len(set(frames)) != len(frames):
                raise FrameOrderError(f"track {tid} repeats a frame")
        ts.next_id = max([t + 1 for t in ts.tracks if t >= 0], default=0)
        return ts

    def last_frame(self) -> int:
        frames = [entries[-1][0] for entries in self.tracks.values() if entries]
        return max(frames, default=-1)

    def track_ids(self) -> list[int]:
        return sorted(self.tracks)

    def records(self) -> list[tuple[int, int, QueryRecord]]:
        """All (track_id, frame, record) triples ordered by (frame, track_id)."""
        out = [
            (tid, frame, rec)
            for tid, entries in self.tracks.items()
            for frame, rec in entries
        ]
        out.sort(key=lambda t: (t[1], t[0]))
        return out

    def _append(self, tid: int, frame: int, rec: QueryRecord) -> None:
        entries = self.tracks.setdefault(tid, [])
        if entries and entries[-1][0] >= frame:
            raise FrameOrderError(f"track {tid} already has frame {entries[-1][0]}")
        entries.append((frame, rec))

    def _check_new_frame(self, frame_records: Sequence[QueryRecord]) -> int | None:
        if not frame_records:
            return None
        frames = {r.frame for r in frame_records}
        if len(frames) != 1:
            raise FrameOrderError(f"records span several frames: {sorted(frames)}")
        frame = frames.pop()
        if frame <= self.last_frame():
            raise FrameOrderError(
                f"frame {frame} does not advance past {self.last_frame()}"
            )
        return frame

    def _thing_ids(self) -> list[int]:
        if self.mode == "instance":
            return sorted(self.tracks)
        return sorted(
            tid
            for tid, entries in self.tracks.items()
            if entries and entries[0][1].kind == "thing"
        )

    # -- stepping ----------------------------------------------------------

    def step_instance(
        self, frame_records: Sequence[QueryRecord], cfg: MatchConfig = MatchConfig()
    ) -> "TrackSet":
        """Match new records against track heads; spawn or drop the rest.

        Rows are active thing tracks in ascending id order, columns the given
        records in input order. Matches below cfg.affinity_floor are rejected.
        Rejected and unmatched records spawn new tracks in input order under
        the "spawn" policy and are discarded under "drop".
        """
        if self.mode == "semantic":
            raise ModeMismatchError("instance stepping on a semantic track set")
        frame = self._check_new_frame(frame_records)
        if frame is None:
            return self
        self._assoc_things(frame, frame_records, cfg)
        return self

    def step_semantic(
        self,
        frame_records: Sequence[QueryRecord],
        class_bank=None,
    ) -> "TrackSet":
        """Route each stuff record to the track owning its class.

        Records with class_id fall straight through; records without one are
        classified by the bank's prototype matching and stored with the
        resolved id, so stored stuff records always carry a class. Tracks are
        created on first sight of a class.
        """
        if self.mode == "instance":
            raise ModeMismatchError("semantic stepping on an instance track set")
        frame = self._check_new_frame(frame_records)
        if frame is None:
            return self
        self._assoc_stuff(frame, frame_records, class_bank)
        return self

    def step_panoptic(
        self,
        frame_records: Sequence[QueryRecord],
        cfg: MatchConfig = MatchConfig(),
        class_bank=None,
    ) -> "TrackSet":
        """Split one frame's records by kind: things matched, stuff routed."""
        if self.mode != "panoptic":
            raise ModeMismatchError(f"panoptic stepping on a {self.mode} track set")
        frame = self._check_new_frame(frame_records)
        if frame is None:
            return self
        things = [r for r in frame_records if r.kind == "thing"]
        stuff = [r for r in frame_records if r.kind == "stuff"]
        if things:
            self._assoc_things(frame, things, cfg)
        if stuff:
            self._assoc_stuff(frame, stuff, class_bank)
        return self

    def _assoc_things(
        self, frame: int, records: Sequence[QueryRecord], cfg: MatchConfig
    ) -> None:
        row_ids = self._thing_ids()
        matched_cols: set[int] = set()
        if row_ids:
            heads = [self.tracks[tid][-1][1] for tid in row_ids]
            aff = spa_affinity(heads, records, cfg.use_spa)
            for row, col in hungarian(aff):
                if aff[row, col] >= cfg.affinity_floor:
                    self._append(row_ids[row], frame, records[col])
                    matched_cols.add(col)
        if cfg.new_track_policy == "spawn":
            for col, rec in enumerate(records):
                if col not in matched_cols:
                    tid = self.next_id
                    self.next_id += 1
                    self._append(tid, frame, rec)

    def _assoc_stuff(
        self, frame: int, records: Sequence[QueryRecord], class_bank
    ) -> None:
        for rec in records:
            if rec.kind != "stuff":
                raise ModeMismatchError(
                    f"record {rec.mask_ref!r} is {rec.kind}, expected stuff"
                )
            cid = rec.class_id
            if cid is None:
                if class_bank is None or class_bank.is_empty:
                    raise MissingBankError(
                        f"record {rec.mask_ref!r} has no class_id and no bank to ask"
                    )
                cid = class_bank.classify(rec.embedding)
                rec = replace(rec, class_id=cid)
            tid = cid if self.mode == "semantic" else -(1 + cid)
            self._append(tid, frame, rec)


def init_exemplar_tracks(
    hints: Sequence[tuple[str, object]],
    fmap: np.ndarray,
    projector: Callable[[np.ndarray], np.ndarray] | None = None,
) -> list[QueryRecord]:
    """Turn user hints on a feature map into seed records, one track each.

    Each hint is ("point", (x, y)), ("box", (x0, y0, x1, y1)) with inclusive
    integer pixel corners, or ("mask", bool array). Point hints sample the map
    bilinearly; box and mask hints average the map over the region. The result
    runs through projector (identity when None) and becomes the embedding of a
    thing record at frame 0.
    """
    if not hints:
        raise ValueError("need at least one hint")
    fmap = np.asarray(fmap)
    h, w = fmap.shape[:2]
    out = []
    for i, (kind, geom) in enumerate(hints):
        if kind == "point":
            feat = mask_geometry.sample_feature(fmap, geom)  # type: ignore[arg-type]
        elif kind == "box":
            x0, y0, x1, y1 = (int(v) for v in geom)  # type: ignore[misc]
            region = np.zeros((h, w), dtype=bool)
            region[max(y0, 0) : y1 + 1, max(x0, 0) : x1 + 1] = True
            feat = mask_geometry.region_mean_feature(fmap, region)
        elif kind == "mask":
            feat = mask_geometry.region_mean_feature(fmap, np.asarray(geom, dtype=bool))
        else:
            raise ValueError(f"unknown hint kind {kind!r}")
        emb = projector(feat) if projector is not None else feat
        out.append(
            QueryRecord(embedding=np.asarray(emb, dtype=float), frame=0, mask_ref=f"hint{i}")
        )
    return out
