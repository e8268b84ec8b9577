"""Interchange codecs: masks, feature maps, embeddings, descriptors, tracks.

Writers are canonical so that write -> read -> write reproduces files byte
for byte: fixed key order, fixed separators, shortest round-trip float text,
little-endian binary layouts. Readers validate and raise FormatError on
anything malformed.

Formats
-------
mask RLE JSON   {"h": H, "w": W, "counts": [c0, c1, ...]} with alternating
                run lengths over the row-major flattening, first run counting
                false pixels (possibly 0).
mask PNG        8-bit grayscale, any value > 0 is foreground.
feature map     binary, magic "GVFM", u32 width/height/channels (LE), then
                f32 values row-major with channels last.
embeddings      binary, magic "GVQE", u32 count, u32 d_model (LE), then
                count * d_model f32 values; record metadata rides in a JSON
                sidecar.
descriptor JSON {"u", "v", "d_model", "r_max", "center", "hist", "embedded"}
                with hist flattened angle-major.
tracks JSON     {"video", "mode", "tracks": [{"id", "class_id", "kind",
                "frames", "mask_refs"}]} sorted by id.
batches JSONL   one {"anchor", "positives", "negatives"} object per line,
                values are record indices into the embeddings file.
bank JSON       {"momentum", "n_q", "classes": {id: {"queue", "prototype"}}}.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .association import QueryRecord, TrackSet
from .descriptor import ShapePositionDescriptor
from .errors import FormatError
from .sampling import ClassQueryBank, SampleBatch
from .synth import ObjectSpec, SceneSpec

_GVFM_MAGIC = b"GVFM"
_GVQE_MAGIC = b"GVQE"


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{what}: not valid JSON ({e})") from e


# -- run-length masks --------------------------------------------------------


def mask_to_rle(mask: np.ndarray) -> dict:
    """Canonical alternating run lengths, first run counting false pixels."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.ravel()
    counts = []
    if flat.size:
        changes = np.flatnonzero(np.diff(flat.astype(np.int8)))
        edges = np.concatenate([[-1], changes, [flat.size - 1]])
        counts = np.diff(edges).tolist()
        if flat[0]:  # canonical form starts with a false run
            counts = [0] + counts
    return {"h": int(h), "w": int(w), "counts": [int(c) for c in counts]}


def rle_to_mask(obj: dict) -> np.ndarray:
    try:
        h, w, counts = int(obj["h"]), int(obj["w"]), list(obj["counts"])
    except (KeyError, TypeError) as e:
        raise FormatError(f"mask RLE missing field: {e}") from e
    if h < 1 or w < 1:
        raise FormatError(f"mask RLE has bad dimensions {h}x{w}")
    if any((not isinstance(c, int)) or c < 0 for c in counts):
        raise FormatError("mask RLE counts must be nonnegative integers")
    if sum(counts) != h * w:
        raise FormatError(f"mask RLE counts sum {sum(counts)} != {h * w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        flat[pos : pos + c] = value
        pos += c
        value = not value
    return flat.reshape(h, w)


def write_mask_rle(path: str | Path, mask: np.ndarray) -> None:
    Path(path).write_text(_dump_json(mask_to_rle(mask)))


def read_mask_rle(path: str | Path) -> np.ndarray:
    try:
        return rle_to_mask(_load_json(Path(path).read_text(), str(path)))
    except FormatError as e:
        if str(e).startswith(str(path)):
            raise
        raise FormatError(f"{path}: {e}") from e


def write_mask_png(path: str | Path, mask: np.ndarray) -> None:
    arr = (np.asarray(mask, dtype=bool) * np.uint8(255))
    Image.fromarray(arr, mode="L").save(str(path))


def read_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as img:
        return np.asarray(img.convert("L")) > 0


def read_mask(path: str | Path) -> np.ndarray:
    """Dispatch on suffix: .png grayscale or .json run-length."""
    p = Path(path)
    if p.suffix.lower() == ".png":
        return read_mask_png(p)
    return read_mask_rle(p)


# -- feature maps and embeddings ---------------------------------------------


def write_feature_map(path: str | Path, fmap: np.ndarray) -> None:
    fmap = np.asarray(fmap, dtype=np.float32)
    if fmap.ndim != 3:
        raise FormatError(f"feature map must be (H, W, C), got shape {fmap.shape}")
    h, w, c = fmap.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", _GVFM_MAGIC, w, h, c))
        f.write(fmap.tobytes(order="C"))


def read_feature_map(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != _GVFM_MAGIC:
        raise FormatError(f"{path}: not a feature-map file")
    _, w, h, c = struct.unpack("<4sIII", blob[:16])
    want = 16 + 4 * w * h * c
    if len(blob) != want:
        raise FormatError(f"{path}: expected {want} bytes, found {len(blob)}")
    return np.frombuffer(blob[16:], dtype="<f4").reshape(h, w, c).copy()


def write_embeddings(path: str | Path, embeddings: np.ndarray) -> None:
    emb = np.asarray(embeddings, dtype=np.float32)
    if emb.ndim != 2:
        raise FormatError(f"embeddings must be (count, d_model), got {emb.shape}")
    count, d_model = emb.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", _GVQE_MAGIC, count, d_model))
        f.write(emb.tobytes(order="C"))


def read_embeddings(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != _GVQE_MAGIC:
        raise FormatError(f"{path}: not an embeddings file")
    _, count, d_model = struct.unpack("<4sII", blob[:12])
    want = 12 + 4 * count * d_model
    if len(blob) != want:
        raise FormatError(f"{path}: expected {want} bytes, found {len(blob)}")
    return np.frombuffer(blob[12:], dtype="<f4").reshape(count, d_model).copy()


# -- record sidecar ----------------------------------------------------------


def records_to_json_obj(video: str, records: Sequence[QueryRecord]) -> dict:
    return {
        "video": video,
        "records": [
            {
                "frame": int(r.frame),
                "mask_ref": r.mask_ref,
                "kind": r.kind,
                "class_id": None if r.class_id is None else int(r.class_id),
            }
            for r in records
        ],
    }


def write_record_sidecar(path: str | Path, video: str, records: Sequence[QueryRecord]) -> None:
    Path(path).write_text(_dump_json(records_to_json_obj(video, records)))


def read_record_sidecar(path: str | Path) -> tuple[str, list[dict]]:
    obj = _load_json(Path(path).read_text(), str(path))
    try:
        video = obj["video"]
        rows = obj["records"]
        for row in rows:
            row["frame"], row["mask_ref"], row["kind"]
    except (KeyError, TypeError) as e:
        raise FormatError(f"{path}: record sidecar missing field {e}") from e
    return video, rows


# -- descriptors -------------------------------------------------------------


def descriptor_to_json_obj(desc: ShapePositionDescriptor) -> dict:
    return {
        "u": desc.u,
        "v": desc.v,
        "d_model": desc.d_model,
        "r_max": float(desc.r_max),
        "center": [float(desc.center[0]), float(desc.center[1])],
        "hist": [float(x) for x in desc.hist.reshape(-1)],
        "embedded": [float(x) for x in desc.embedded],
    }


def descriptor_from_json_obj(obj: dict) -> ShapePositionDescriptor:
    try:
        u, v, d_model = int(obj["u"]), int(obj["v"]), int(obj["d_model"])
        hist = np.array(obj["hist"], dtype=float).reshape(u, v)
        embedded = np.array(obj["embedded"], dtype=float)
        center = (float(obj["center"][0]), float(obj["center"][1]))
        r_max = float(obj["r_max"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"descriptor JSON malformed: {e}") from e
    if len(embedded) != d_model:
        raise FormatError(f"descriptor embedded length {len(embedded)} != {d_model}")
    return ShapePositionDescriptor(hist=hist, r_max=r_max, center=center, embedded=embedded)


def write_descriptor(path: str | Path, desc: ShapePositionDescriptor) -> None:
    Path(path).write_text(_dump_json(descriptor_to_json_obj(desc)))


def read_descriptor(path: str | Path) -> ShapePositionDescriptor:
    return descriptor_from_json_obj(_load_json(Path(path).read_text(), str(path)))


# -- track sets --------------------------------------------------------------


def trackset_to_json_obj(tracks: TrackSet, video: str) -> dict:
    rows = []
    for tid in tracks.track_ids():
        entries = tracks.tracks[tid]
        first = entries[0][1]
        rows.append(
            {
                "id": int(tid),
                "class_id": None if first.class_id is None else int(first.class_id),
                "kind": first.kind,
                "frames": [int(f) for f, _ in entries],
                "mask_refs": [r.mask_ref for _, r in entries],
            }
        )
    return {"video": video, "mode": tracks.mode, "tracks": rows}


def trackset_from_json_obj(obj: dict, embeddings: dict[str, np.ndarray] | None = None) -> tuple[TrackSet, str]:
    """Rebuild a TrackSet; optional embeddings keyed by mask_ref (zeros otherwise)."""
    try:
        video = obj["video"]
        mode = obj["mode"]
        rows = obj["tracks"]
    except (KeyError, TypeError) as e:
        raise FormatError(f"tracks JSON missing field: {e}") from e
    assignments = []
    for row in rows:
        try:
            tid = int(row["id"])
            kind = row["kind"]
            class_id = row["class_id"]
            frames = row["frames"]
            refs = row["mask_refs"]
        except (KeyError, TypeError) as e:
            raise FormatError(f"track row missing field: {e}") from e
        if len(frames) != len(refs):
            raise FormatError(f"track {tid}: {len(frames)} frames vs {len(refs)} masks")
        for frame, ref in zip(frames, refs):
            emb = embeddings.get(ref) if embeddings else None
            if emb is None:
                emb = np.zeros(1)
            assignments.append(
                (
                    tid,
                    int(frame),
                    QueryRecord(
                        embedding=emb,
                        frame=int(frame),
                        mask_ref=ref,
                        kind=kind,
                        class_id=None if class_id is None else int(class_id),
                    ),
                )
            )
    return TrackSet.from_assignments(mode, assignments), video


def write_trackset(path: str | Path, tracks: TrackSet, video: str) -> None:
    Path(path).write_text(_dump_json(trackset_to_json_obj(tracks, video)))


def read_trackset(path: str | Path, embeddings: dict[str, np.ndarray] | None = None) -> tuple[TrackSet, str]:
    return trackset_from_json_obj(_load_json(Path(path).read_text(), str(path)), embeddings)


# -- sample batches ----------------------------------------------------------


def write_batches(path: str | Path, batches: Sequence[tuple[int, list[int], list[int]]]) -> None:
    """Each entry is (anchor_index, positive_indices, negative_indices)."""
    lines = []
    for anchor, pos, neg in batches:
        lines.append(
            json.dumps(
                {"anchor": int(anchor), "positives": [int(i) for i in pos], "negatives": [int(i) for i in neg]},
                separators=(",", ":"),
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_batches(path: str | Path) -> list[tuple[int, list[int], list[int]]]:
    out = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        obj = _load_json(line, f"{path}:{line_no}")
        try:
            out.append((int(obj["anchor"]), list(obj["positives"]), list(obj["negatives"])))
        except (KeyError, TypeError) as e:
            raise FormatError(f"{path}:{line_no}: batch missing field {e}") from e
    return out


def batch_indices(batch: SampleBatch, index_of: dict[str, int]) -> tuple[int, list[int], list[int]]:
    """Map a batch's records to indices via their mask_refs."""
    return (
        index_of[batch.anchor.mask_ref],
        [index_of[r.mask_ref] for r in batch.positives],
        [index_of[r.mask_ref] for r in batch.negatives],
    )


# -- class bank checkpoints ---------------------------------------------------


def bank_to_json_obj(bank: ClassQueryBank) -> dict:
    classes = {}
    for cid in bank.class_ids():
        classes[str(cid)] = {
            "queue": [[float(x) for x in e] for e in bank.queues[cid]],
            "prototype": [float(x) for x in bank.prototypes[cid]],
        }
    return {"momentum": float(bank.momentum), "n_q": int(bank.n_q), "classes": classes}


def bank_from_json_obj(obj: dict) -> ClassQueryBank:
    try:
        bank = ClassQueryBank(n_q=int(obj["n_q"]), momentum=float(obj["momentum"]))
        for cid_text, entry in obj["classes"].items():
            cid = int(cid_text)
            bank.queues[cid] = [np.array(e, dtype=float) for e in entry["queue"]]
            bank.prototypes[cid] = np.array(entry["prototype"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bank JSON malformed: {e}") from e
    return bank


def write_bank(path: str | Path, bank: ClassQueryBank) -> None:
    Path(path).write_text(_dump_json(bank_to_json_obj(bank)))


def read_bank(path: str | Path) -> ClassQueryBank:
    return bank_from_json_obj(_load_json(Path(path).read_text(), str(path)))


# -- scene specs --------------------------------------------------------------


def scene_spec_to_json_obj(spec: SceneSpec) -> dict:
    return {
        "width": spec.width,
        "height": spec.height,
        "frames": spec.frames,
        "seed": spec.seed,
        "border_test": spec.border_test,
        "objects": [
            {
                "shape": o.shape,
                "params": _params_obj(o),
                "kind": o.kind,
                "class_id": None if o.class_id is None else int(o.class_id),
                "trajectory": [[float(v) for v in p] for p in o.trajectory],
                "embedding_prototype": [float(v) for v in o.embedding_prototype],
                "embedding_noise_sigma": float(o.embedding_noise_sigma),
            }
            for o in spec.objects
        ],
    }


def _params_obj(o: ObjectSpec):
    if o.shape == "polygon":
        return [[float(x), float(y)] for x, y in o.params]
    return [float(v) for v in o.params]


def scene_spec_from_json_obj(obj: dict) -> SceneSpec:
    try:
        objects = []
        for row in obj["objects"]:
            shape = row["shape"]
            if shape == "polygon":
                params = tuple((float(x), float(y)) for x, y in row["params"])
            else:
                params = tuple(float(v) for v in row["params"])
            objects.append(
                ObjectSpec(
                    shape=shape,
                    params=params,
                    trajectory=tuple(tuple(float(v) for v in p) for p in row["trajectory"]),
                    embedding_prototype=tuple(float(v) for v in row["embedding_prototype"]),
                    kind=row.get("kind", "thing"),
                    class_id=None if row.get("class_id") is None else int(row["class_id"]),
                    embedding_noise_sigma=float(row.get("embedding_noise_sigma", 0.0)),
                )
            )
        return SceneSpec(
            width=int(obj["width"]),
            height=int(obj["height"]),
            frames=int(obj["frames"]),
            objects=tuple(objects),
            seed=int(obj.get("seed", 0)),
            border_test=bool(obj.get("border_test", False)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"scene spec malformed: {e}") from e


def write_scene_spec(path: str | Path, spec: SceneSpec) -> None:
    Path(path).write_text(_dump_json(scene_spec_to_json_obj(spec)))


def read_scene_spec(path: str | Path) -> SceneSpec:
    return scene_spec_from_json_obj(_load_json(Path(path).read_text(), str(path)))
