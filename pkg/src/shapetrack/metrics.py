"""Tube overlap, tube matching, windowed panoptic quality, identity scoring.

A tube is one object's per-frame mask dict. Track sets store mask references
rather than pixels, so every function here takes a ``masks`` mapping from
mask_ref to boolean array alongside the track sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .association import TrackSet, hungarian
from .errors import FrameMismatchError, WindowTooLargeError

Tube = Mapping[int, np.ndarray]


@dataclass(frozen=True)
class TubePair:
    """A matched prediction/ground-truth tube pair and its overlap."""

    pred_id: int
    gt_id: int
    tube_iou: float


@dataclass(frozen=True)
class TrackScore:
    """Association quality summary for one video."""

    association_accuracy: float
    id_switches: int
    matched_pairs: tuple[TubePair, ...]


def tube_iou(pred: Tube, gt: Tube) -> float:
    """Intersection and union summed over frames before dividing.

    Iterates the union of both frame sets; a frame missing from one side
    counts as empty there. Two everywhere-empty tubes give 0.0.
    """
    inter = 0
    union = 0
    for frame in sorted(set(pred) | set(gt)):
        p = pred.get(frame)
        g = gt.get(frame)
        if p is not None and g is not None:
            if p.shape != g.shape:
                raise FrameMismatchError(
                    f"frame {frame}: mask shapes {p.shape} vs {g.shape}"
                )
            inter += int(np.count_nonzero(p & g))
            union += int(np.count_nonzero(p | g))
        elif p is not None:
            union += int(np.count_nonzero(p))
        elif g is not None:
            union += int(np.count_nonzero(g))
    return inter / union if union > 0 else 0.0


def tubes_from_trackset(
    tracks: TrackSet, masks: Mapping[str, np.ndarray]
) -> dict[int, dict[int, np.ndarray]]:
    """Resolve a track set's mask references into per-track tubes."""
    out: dict[int, dict[int, np.ndarray]] = {}
    for tid, frame, rec in tracks.records():
        out.setdefault(tid, {})[frame] = np.asarray(masks[rec.mask_ref], dtype=bool)
    return out


def match_tubes(
    preds: TrackSet,
    gts: TrackSet,
    masks: Mapping[str, np.ndarray],
    iou_floor: float = 0.5,
) -> list[TubePair]:
    """One-to-one tube pairing that maximizes total tube overlap.

    Assignment runs over the full IoU matrix (rows: pred ids ascending,
    columns: gt ids ascending); pairs at or below iou_floor are discarded
    afterwards. Deterministic including ties, via the canonical assignment.
    """
    pred_tubes = tubes_from_trackset(preds, masks)
    gt_tubes = tubes_from_trackset(gts, masks)
    pred_ids = sorted(pred_tubes)
    gt_ids = sorted(gt_tubes)
    if not pred_ids or not gt_ids:
        return []
    iou = np.zeros((len(pred_ids), len(gt_ids)))
    for i, pid in enumerate(pred_ids):
        for j, gid in enumerate(gt_ids):
            iou[i, j] = tube_iou(pred_tubes[pid], gt_tubes[gid])
    pairs = []
    for row, col in hungarian(iou):
        if iou[row, col] > iou_floor:
            pairs.append(
                TubePair(pred_id=pred_ids[row], gt_id=gt_ids[col], tube_iou=float(iou[row, col]))
            )
    return pairs


def _frame_iou(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise FrameMismatchError(f"mask shapes {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    if inter == 0:
        return 0.0
    return inter / int(np.count_nonzero(a | b))


def windowed_tube_pq(
    preds: TrackSet,
    gts: TrackSet,
    masks: Mapping[str, np.ndarray],
    window: int = 4,
) -> float:
    """Panoptic quality of tube fragments inside a sliding frame window.

    For every run of ``window`` consecutive observed frames, tubes are
    restricted to the span; fragment pairs with IoU strictly above 0.5 are
    true positives and the span scores sum(TP IoU) / (TP + FP/2 + FN/2).
    Spans with no tube on either side are skipped; the video score is the
    mean over the remaining spans (1.0 when every span was empty). With
    window=1 this is per-frame panoptic quality averaged over frames.
    """
    pred_tubes = tubes_from_trackset(preds, masks)
    gt_tubes = tubes_from_trackset(gts, masks)
    frames = sorted(
        {f for tube in pred_tubes.values() for f in tube}
        | {f for tube in gt_tubes.values() for f in tube}
    )
    if window < 1 or window > len(frames):
        raise WindowTooLargeError(f"window {window} does not fit {len(frames)} frames")

    def restrict(tube: Tube, span: set[int]) -> dict[int, np.ndarray]:
        return {f: m for f, m in tube.items() if f in span and np.count_nonzero(m)}

    span_scores = []
    for start in range(len(frames) - window + 1):
        span = set(frames[start : start + window])
        pf = {tid: t for tid, t in ((k, restrict(v, span)) for k, v in pred_tubes.items()) if t}
        gf = {tid: t for tid, t in ((k, restrict(v, span)) for k, v in gt_tubes.items()) if t}
        if not pf and not gf:
            continue
        candidates = []
        for pid, pt in pf.items():
            for gid, gt_frag in gf.items():
                overlap = tube_iou(pt, gt_frag)
                if overlap > 0.5:
                    candidates.append((overlap, pid, gid))
        # overlaps above 0.5 are unique per tube for disjoint masks; the sort
        # keeps behavior deterministic if an input violates that
        candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
        used_p: set[int] = set()
        used_g: set[int] = set()
        tp_iou = []
        for overlap, pid, gid in candidates:
            if pid in used_p or gid in used_g:
                continue
            used_p.add(pid)
            used_g.add(gid)
            tp_iou.append(overlap)
        tp = len(tp_iou)
        fp = len(pf) - tp
        fn = len(gf) - tp
        span_scores.append(sum(tp_iou) / (tp + 0.5 * fp + 0.5 * fn))
    return float(np.mean(span_scores)) if span_scores else 1.0


def score_association(
    preds: TrackSet, gts: TrackSet, masks: Mapping[str, np.ndarray]
) -> TrackScore:
    """Count identity switches and majority-track accuracy.

    Each prediction record is matched per frame to the ground-truth object
    with maximal mask IoU above 0.5. For every ground-truth identity the
    matched prediction ids form a frame-ordered sequence; each change between
    consecutive entries is one identity switch. A detection is correctly
    associated when its prediction id is its identity's most frequent one
    (ties toward the smaller id), and accuracy is the correct fraction over
    all matched detections (1.0 when nothing matched).
    """
    gt_tubes = tubes_from_trackset(gts, masks)
    matched: dict[int, list[tuple[int, int]]] = {gid: [] for gid in gt_tubes}
    for pid, frame, rec in preds.records():
        pmask = np.asarray(masks[rec.mask_ref], dtype=bool)
        best_gid, best_iou = None, 0.5
        for gid, tube in gt_tubes.items():
            gmask = tube.get(frame)
            if gmask is None:
                continue
            overlap = _frame_iou(pmask, gmask)
            if overlap > best_iou or (overlap == best_iou and best_gid is not None and gid < best_gid):
                best_gid, best_iou = gid, overlap
        if best_gid is not None:
            matched[best_gid].append((frame, pid))

    switches = 0
    correct = 0
    total = 0
    for gid, seq in matched.items():
        seq.sort()
        pids = [pid for _, pid in seq]
        switches += sum(1 for a, b in zip(pids, pids[1:]) if a != b)
        if pids:
            counts: dict[int, int] = {}
            for pid in pids:
                counts[pid] = counts.get(pid, 0) + 1
            majority = min(
                counts, key=lambda pid: (-counts[pid], pid)
            )
            correct += sum(1 for pid in pids if pid == majority)
            total += len(pids)
    accuracy = correct / total if total else 1.0
    return TrackScore(
        association_accuracy=accuracy,
        id_switches=switches,
        matched_pairs=tuple(match_tubes(preds, gts, masks)),
    )
