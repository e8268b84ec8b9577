"""Command-line front end.

Subcommands: ``descriptor`` (masks to descriptor JSON), ``track`` (scene
directory to tracks JSON), ``sample`` (scene directory to batch JSONL),
``eval`` (tracks vs ground truth to metrics JSON), ``synth`` (scene spec to a
scene directory). Exit codes: 0 success, 2 unparseable input, 3 empty mask,
4 embedding/mask count mismatch, 5 missing descriptors, 6 video id mismatch.

A scene directory holds::

    spec.json        scene spec echo (synth output only)
    masks/<ref>.json per-record run-length masks
    embeddings.gvqe  query embeddings, row per record
    records.json     sidecar with frame, mask_ref, kind, class_id per row
    gt_tracks.json   ground-truth tracks
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .association import QueryRecord, TrackSet
from .config import PipelineConfig, load_config
from .descriptor import DescriptorConfig, descriptor_from_mask
from .errors import (
    EmptyMaskError,
    FormatError,
    MissingDescriptorError,
    ShapeTrackError,
)
from .metrics import score_association, windowed_tube_pq
from .sampling import (
    ClassQueryBank,
    sample_baseline_batch,
    sample_stuff_batch,
    sample_thing_batch,
)
from .synth import generate

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_EMPTY_MASK = 3
EXIT_COUNT_MISMATCH = 4
EXIT_MISSING_DESCRIPTORS = 5
EXIT_ID_MISMATCH = 6


class CountMismatch(ShapeTrackError):
    pass


class VideoIdMismatch(ShapeTrackError):
    pass


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# -- scene loading -----------------------------------------------------------


def _load_scene(scene_dir: Path, dcfg: DescriptorConfig, m_anchors: int, with_descriptors: bool):
    """Read a scene directory into records grouped by frame.

    Returns (video, records ordered as in the sidecar, masks by ref).
    Descriptors are resampled to the embedding width so query + descriptor
    sums are well formed regardless of the config's d_model.
    """
    video, rows = formats.read_record_sidecar(scene_dir / "records.json")
    emb_path = scene_dir / "embeddings.gvqe"
    if not emb_path.exists():
        raise CountMismatch(f"{len(rows)} sidecar records but no embeddings file")
    emb = formats.read_embeddings(emb_path)
    if len(emb) != len(rows):
        raise CountMismatch(
            f"{len(rows)} sidecar records but {len(emb)} embedding rows"
        )
    masks: dict[str, np.ndarray] = {}
    records: list[QueryRecord] = []
    dcfg_scene = DescriptorConfig(
        u=dcfg.u,
        v=dcfg.v,
        d_model=emb.shape[1],
        grid_extent=dcfg.grid_extent,
        radius_margin=dcfg.radius_margin,
        negative_mode=dcfg.negative_mode,
    )
    for i, row in enumerate(rows):
        ref = row["mask_ref"]
        mask_path = scene_dir / "masks" / f"{ref}.json"
        if not mask_path.exists():
            raise CountMismatch(f"mask file missing for record {i}: {mask_path.name}")
        mask = formats.read_mask(mask_path)
        masks[ref] = mask
        desc = None
        if with_descriptors:
            desc = descriptor_from_mask(mask, m=m_anchors, cfg=dcfg_scene)
        records.append(
            QueryRecord(
                embedding=emb[i].astype(float),
                frame=int(row["frame"]),
                mask_ref=ref,
                kind=row["kind"],
                class_id=None if row.get("class_id") is None else int(row["class_id"]),
                descriptor=desc,
            )
        )
    return video, records, masks


def _by_frame(records: list[QueryRecord]) -> list[list[QueryRecord]]:
    frames = sorted({r.frame for r in records})
    return [[r for r in records if r.frame == f] for f in frames]


# -- subcommands -------------------------------------------------------------


def cmd_descriptor(args, cfg: PipelineConfig) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def one(path_text: str) -> tuple[str, dict]:
        p = Path(path_text)
        mask = formats.read_mask(p)
        if not mask.any():
            raise EmptyMaskError(f"{p}: mask has no foreground pixel")
        desc = descriptor_from_mask(mask, m=cfg.m_anchors, cfg=cfg.descriptor)
        return p.stem, formats.descriptor_to_json_obj(desc)

    results = []
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(one, args.masks))
    else:
        results = [one(p) for p in args.masks]
    for stem, obj in results:  # canonical order: input order
        target = (out_dir or Path(".")) / f"{stem}.desc.json"
        target.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")
        print(target)
    return EXIT_OK


def cmd_track(args, cfg: PipelineConfig) -> int:
    import dataclasses

    scene_dir = Path(args.scene)
    use_spa = cfg.match.use_spa if args.spa is None else args.spa
    need_desc = use_spa and cfg.mode in ("instance", "panoptic")
    video, records, _ = _load_scene(scene_dir, cfg.descriptor, cfg.m_anchors, need_desc)
    match_cfg = dataclasses.replace(cfg.match, use_spa=use_spa)
    tracks = TrackSet(cfg.mode)
    dump: list[dict] = []
    from .association import spa_affinity  # local import keeps module load light

    for frame_records in _by_frame(records):
        if args.dump_affinity and cfg.mode in ("instance", "panoptic"):
            row_ids = tracks._thing_ids()
            things = [r for r in frame_records if r.kind == "thing"]
            if row_ids and things:
                heads = [tracks.tracks[tid][-1][1] for tid in row_ids]
                aff = spa_affinity(heads, things, use_spa)
                dump.append(
                    {
                        "frame": int(frame_records[0].frame),
                        "track_ids": [int(t) for t in row_ids],
                        "mask_refs": [r.mask_ref for r in things],
                        "affinity": [[float(v) for v in row] for row in aff],
                    }
                )
        if cfg.mode == "instance":
            tracks.step_instance(frame_records, match_cfg)
        elif cfg.mode == "semantic":
            tracks.step_semantic(frame_records)
        else:
            tracks.step_panoptic(frame_records, match_cfg)

    formats.write_trackset(Path(args.out), tracks, video)
    print(args.out)
    if args.dump_affinity:
        Path(args.dump_affinity).write_text(json.dumps(dump, indent=2) + "\n")
        print(args.dump_affinity)
    return EXIT_OK


def cmd_sample(args, cfg: PipelineConfig) -> int:
    scene_dir = Path(args.scene)
    need_desc = args.strategy == "task"
    try:
        video, records, masks = _load_scene(scene_dir, cfg.descriptor, cfg.m_anchors, need_desc)
    except EmptyMaskError as e:
        # a record whose mask has no foreground cannot get a descriptor; the
        # baseline strategy tolerates that, the task strategy cannot
        raise MissingDescriptorError(f"task strategy needs every descriptor: {e}") from e
    gt, gt_video = formats.read_trackset(scene_dir / "gt_tracks.json")
    if gt_video != video:
        raise VideoIdMismatch(f"records say video {video!r}, tracks say {gt_video!r}")

    # rebuild the ground-truth track set over the loaded records
    by_ref = {r.mask_ref: r for r in records}
    assignments = []
    for tid, frame, rec in gt.records():
        if rec.mask_ref not in by_ref:
            raise CountMismatch(f"ground truth references unknown mask {rec.mask_ref!r}")
        assignments.append((tid, frame, by_ref[rec.mask_ref]))
    video_tracks = TrackSet.from_assignments(gt.mode, assignments)

    index_of = {r.mask_ref: i for i, r in enumerate(records)}
    anchors = [
        (tid, frame, rec)
        for tid, frame, rec in video_tracks.records()
    ]
    if args.anchors == "random":
        rng = np.random.default_rng(args.seed)
        picks = rng.choice(len(anchors), size=min(args.anchor_count, len(anchors)), replace=False)
        anchors = [anchors[int(i)] for i in sorted(picks)]

    window = args.window if args.window is not None else cfg.window

    batches = []
    if args.strategy == "baseline":
        for tid, frame, rec in anchors:
            b = sample_baseline_batch(video_tracks, (tid, frame), window)
            batches.append(formats.batch_indices(b, index_of))
    else:
        bank = ClassQueryBank(n_q=cfg.n_q, momentum=cfg.momentum)
        stuff_order = [
            (rec.class_id, rec) for _, _, rec in video_tracks.records() if rec.kind == "stuff"
        ]
        slot_refs: dict[int, list[str]] = {}
        for cid, rec in stuff_order:
            bank.update(int(cid), rec.embedding)
            refs = slot_refs.setdefault(int(cid), [])
            refs.append(rec.mask_ref)
            if len(refs) > bank.n_q:
                refs.pop(0)
        for tid, frame, rec in anchors:
            if rec.kind == "thing":
                b = sample_thing_batch(video_tracks, (tid, frame), cfg.tau)
                batches.append(formats.batch_indices(b, index_of))
            else:
                refs = slot_refs.get(int(rec.class_id), [])
                own = refs.index(rec.mask_ref) if rec.mask_ref in refs else None
                b = sample_stuff_batch(bank, rec, own_slot=own)

                def to_index(qr: QueryRecord) -> int:
                    # bank records are named bank/<class>/<slot>; slots mirror
                    # the reference FIFO kept in slot_refs
                    slot = int(qr.mask_ref.rsplit("/", 1)[1])
                    return index_of[slot_refs[int(qr.class_id)][slot]]

                batches.append(
                    (
                        index_of[rec.mask_ref],
                        [to_index(q) for q in b.positives],
                        [to_index(q) for q in b.negatives],
                    )
                )
    formats.write_batches(Path(args.out), batches)
    print(args.out)
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    pred, pred_video = formats.read_trackset(Path(args.tracks))
    gt_dir = Path(args.gt)
    gt, gt_video = formats.read_trackset(gt_dir / "gt_tracks.json")
    if pred_video != gt_video:
        raise VideoIdMismatch(f"prediction video {pred_video!r} vs ground truth {gt_video!r}")
    masks = {}
    for p in sorted((gt_dir / "masks").glob("*.json")):
        masks[p.stem] = formats.read_mask(p)
    for p in sorted((gt_dir / "masks").glob("*.png")):
        masks[p.stem] = formats.read_mask(p)
    window = args.window if args.window is not None else cfg.window
    score = score_association(pred, gt, masks)
    pq = windowed_tube_pq(pred, gt, masks, window=window)
    report = {
        "video": gt_video,
        "window": int(window),
        "tube_pq": pq,
        "association_accuracy": score.association_accuracy,
        "id_switches": int(score.id_switches),
        "pairs": [
            {"pred_id": p.pred_id, "gt_id": p.gt_id, "tube_iou": p.tube_iou}
            for p in score.matched_pairs
        ],
    }
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_synth(args, cfg: PipelineConfig) -> int:
    spec = formats.read_scene_spec(Path(args.spec))
    if args.seed is not None:
        import dataclasses

        spec = dataclasses.replace(spec, seed=args.seed)
    out_dir = Path(args.out)
    video = args.video or out_dir.name
    truth = generate(spec)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    formats.write_scene_spec(out_dir / "spec.json", spec)
    for ref, mask in truth.masks.items():
        formats.write_mask_rle(out_dir / "masks" / f"{ref}.json", mask)
    emb = np.stack([r.embedding for r in truth.records])
    formats.write_embeddings(out_dir / "embeddings.gvqe", emb)
    formats.write_record_sidecar(out_dir / "records.json", video, truth.records)
    formats.write_trackset(out_dir / "gt_tracks.json", truth.tracks, video)
    print(out_dir)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapetrack",
        description="Shape- and position-aware video object association.",
    )
    parser.add_argument("--config", default=None, help="key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    # the same flags are accepted after the subcommand name; SUPPRESS keeps a
    # subcommand from clobbering a value given in the global position
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("descriptor", help="build descriptors from mask files", parents=[shared])
    p.add_argument("masks", nargs="+", help="mask files (.png or .json run-length)")
    p.add_argument("--out", help="output directory (default: current)")
    p.set_defaults(func=cmd_descriptor)

    p = sub.add_parser("track", parents=[shared], help="associate a scene's records into tracks")
    p.add_argument("scene", help="scene directory")
    p.add_argument("--out", default="tracks.json", help="output tracks JSON")
    p.add_argument("--spa", dest="spa", action="store_true", default=None)
    p.add_argument("--no-spa", dest="spa", action="store_false")
    p.add_argument("--dump-affinity", help="write per-frame affinity matrices here")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("sample", parents=[shared], help="emit training batches for a scene")
    p.add_argument("scene", help="scene directory")
    p.add_argument("--strategy", choices=("task", "baseline"), default="task")
    p.add_argument("--window", type=int, default=None, help="baseline +- window")
    p.add_argument("--anchors", choices=("all", "random"), default="all")
    p.add_argument("--anchor-count", type=int, default=16)
    p.add_argument("--out", default="batches.jsonl", help="output JSONL")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[shared], help="score predicted tracks against ground truth")
    p.add_argument("tracks", help="predicted tracks JSON")
    p.add_argument("gt", help="ground-truth scene directory")
    p.add_argument("--window", type=int, default=None, help="tube quality window")
    p.add_argument("--out", help="metrics JSON (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[shared], help="generate a synthetic scene directory")
    p.add_argument("spec", help="scene spec JSON")
    p.add_argument("--out", required=True, help="scene output directory")
    p.add_argument("--video", help="video id (default: output directory name)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except FormatError as e:
        return _fail(EXIT_PARSE, str(e))
    except EmptyMaskError as e:
        return _fail(EXIT_EMPTY_MASK, str(e))
    except CountMismatch as e:
        return _fail(EXIT_COUNT_MISMATCH, str(e))
    except (MissingDescriptorError,) as e:
        return _fail(EXIT_MISSING_DESCRIPTORS, str(e))
    except VideoIdMismatch as e:
        return _fail(EXIT_ID_MISMATCH, str(e))
    except OSError as e:
        return _fail(EXIT_PARSE, str(e))
    except ShapeTrackError as e:
        return _fail(1, str(e))


def entry() -> None:
    raise SystemExit(main())
