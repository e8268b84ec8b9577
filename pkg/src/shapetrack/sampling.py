"""Training-pair selection: matched-query gathering, class queues, batches.

Thing batches pair an anchor record with every same-identity record whose
descriptor change ratio stays under tau, no matter how far apart in time;
same-identity records that drifted past tau and all other-identity records
are negatives. Stuff positives come from a FIFO class queue instead of the
current clip. The plain +-window sampler is kept as the comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .association import QueryRecord, TrackSet
from .descriptor import delta_h
from .errors import (
    DimensionMismatchError,
    MalformedIndicatorError,
    MissingBankError,
    MissingClassError,
    MissingDescriptorError,
    ShapeMismatchError,
    UnknownAnchorError,
)


@dataclass(eq=False)
class SampleBatch:
    """One anchor with its positive and negative record lists."""

    anchor: QueryRecord
    positives: list[QueryRecord] = field(default_factory=list)
    negatives: list[QueryRecord] = field(default_factory=list)


def gather_matched_queries(
    queries: Sequence[QueryRecord], indicator: np.ndarray
) -> list[QueryRecord]:
    """Select the queries a one-hot row indicator points at, in row order.

    indicator is a (k, n) binary matrix over n queries; each row must contain
    exactly one 1 and no query may be claimed by two rows.
    """
    ind = np.asarray(indicator)
    if ind.ndim != 2 or ind.shape[1] != len(queries):
        raise ShapeMismatchError(
            f"indicator shape {ind.shape} does not cover {len(queries)} queries"
        )
    if not np.isin(ind, (0, 1)).all():
        raise MalformedIndicatorError("indicator entries must be 0 or 1")
    if not (ind.sum(axis=1) == 1).all():
        raise MalformedIndicatorError("every indicator row needs exactly one 1")
    if (ind.sum(axis=0) > 1).any():
        raise MalformedIndicatorError("a query is claimed by more than one row")
    return [queries[int(np.argmax(row))] for row in ind]


class ClassQueryBank:
    """Per-class FIFO queues of embeddings plus momentum prototypes.

    Pushing to a full queue evicts the oldest entry. The prototype starts as
    the first embedding pushed for the class and then follows
    ``momentum * prototype + (1 - momentum) * embedding``. Single-writer.
    """

    def __init__(self, n_q: int = 100, momentum: float = 0.99):
        if n_q < 1:
            raise ValueError(f"queue capacity must be positive, got {n_q}")
        if not (0.0 <= momentum < 1.0):
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.n_q = n_q
        self.momentum = momentum
        self.queues: dict[int, list[np.ndarray]] = {}
        self.prototypes: dict[int, np.ndarray] = {}

    @property
    def is_empty(self) -> bool:
        return not self.prototypes

    def class_ids(self) -> list[int]:
        return sorted(self.queues)

    def update(self, class_id: int, embedding: np.ndarray) -> "ClassQueryBank":
        emb = np.asarray(embedding, dtype=float).copy()
        proto = self.prototypes.get(class_id)
        if proto is not None and proto.shape != emb.shape:
            raise DimensionMismatchError(
                f"class {class_id} holds width {proto.shape}, got {emb.shape}"
            )
        queue = self.queues.setdefault(class_id, [])
        queue.append(emb)
        if len(queue) > self.n_q:
            queue.pop(0)
        if proto is None:
            self.prototypes[class_id] = emb.copy()
        else:
            self.prototypes[class_id] = self.momentum * proto + (1.0 - self.momentum) * emb
        return self

    def classify(self, embedding: np.ndarray) -> int:
        """Cosine argmax over prototypes; ties go to the smallest class id."""
        if self.is_empty:
            raise MissingBankError("bank holds no prototypes")
        emb = np.asarray(embedding, dtype=float)
        n = np.linalg.norm(emb)
        best_cid, best_sim = None, -np.inf
        for cid in sorted(self.prototypes):
            proto = self.prototypes[cid]
            pn = np.linalg.norm(proto)
            sim = 0.0 if n == 0 or pn == 0 else float(emb @ proto / (n * pn))
            if sim > best_sim:
                best_cid, best_sim = cid, sim
        return int(best_cid)


def update_bank(bank: ClassQueryBank, class_id: int, embedding: np.ndarray) -> ClassQueryBank:
    """Push one embedding; mutates and returns the bank."""
    return bank.update(class_id, embedding)


def _find_anchor(video: TrackSet, anchor_ref: tuple[int, int]) -> QueryRecord:
    tid, frame = anchor_ref
    for f, rec in video.tracks.get(tid, []):
        if f == frame:
            return rec
    raise UnknownAnchorError(f"no record at track {tid}, frame {frame}")


def sample_thing_batch(
    video: TrackSet, anchor_ref: tuple[int, int], tau: float = 0.2
) -> SampleBatch:
    """Whole-video positives gated by descriptor stability.

    Every record in the video except the anchor lands in exactly one list:
    positives when it shares the anchor's track and its descriptor change
    ratio against the anchor is strictly under tau, negatives otherwise.
    Both lists are ordered by (frame, track_id). Requires descriptors on all
    records.
    """
    anchor = _find_anchor(video, anchor_ref)
    if anchor.descriptor is None:
        raise MissingDescriptorError(f"anchor {anchor.mask_ref!r} has no descriptor")
    batch = SampleBatch(anchor=anchor)
    for tid, frame, rec in video.records():
        if rec is anchor:
            continue
        if rec.descriptor is None:
            raise MissingDescriptorError(f"record {rec.mask_ref!r} has no descriptor")
        if tid == anchor_ref[0] and delta_h(anchor.descriptor, rec.descriptor) < tau:
            batch.positives.append(rec)
        else:
            batch.negatives.append(rec)
    return batch


def sample_stuff_batch(
    bank: ClassQueryBank, anchor: QueryRecord, own_slot: int | None = None
) -> SampleBatch:
    """Positives from the anchor class's queue, negatives from every other.

    One queue entry is treated as the anchor's own copy and skipped: the slot
    given as own_slot when the caller tracked where the anchor was pushed,
    otherwise the first entry whose value equals the anchor's embedding.
    Entries are wrapped as stuff records named bank/<class>/<slot>, in queue
    (oldest-first) order, negative classes in ascending id order.
    """
    if anchor.class_id is None:
        raise ValueError("stuff anchor needs a class_id")
    cid = int(anchor.class_id)
    queue = bank.queues.get(cid, [])
    others = [c for c in bank.class_ids() if c != cid and bank.queues[c]]
    if not queue and not others:
        raise MissingClassError(f"bank has no entries for class {cid} nor any other")

    def wrap(c: int, slot: int, emb: np.ndarray) -> QueryRecord:
        return QueryRecord(
            embedding=emb, frame=-1, mask_ref=f"bank/{c}/{slot}", kind="stuff", class_id=c
        )

    batch = SampleBatch(anchor=anchor)
    anchor_emb = np.asarray(anchor.embedding, dtype=float)
    skipped_self = False
    for slot, emb in enumerate(queue):
        if own_slot is not None:
            if slot == own_slot:
                continue
        elif (
            not skipped_self
            and emb.shape == anchor_emb.shape
            and np.array_equal(emb, anchor_emb)
        ):
            skipped_self = True
            continue
        batch.positives.append(wrap(cid, slot, emb))
    for c in others:
        for slot, emb in enumerate(bank.queues[c]):
            batch.negatives.append(wrap(c, slot, emb))
    return batch


def sample_baseline_batch(
    video: TrackSet, anchor_ref: tuple[int, int], window: int = 1
) -> SampleBatch:
    """Plain temporal sampler: candidates only within +-window frames."""
    if window < 0:
        raise ValueError(f"window must be nonnegative, got {window}")
    anchor = _find_anchor(video, anchor_ref)
    batch = SampleBatch(anchor=anchor)
    for tid, frame, rec in video.records():
        if rec is anchor or abs(frame - anchor_ref[1]) > window:
            continue
        if tid == anchor_ref[0]:
            batch.positives.append(rec)
        else:
            batch.negatives.append(rec)
    return batch
