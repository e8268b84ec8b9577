"""Acceptance suite: one test per shipped guarantee, at the stated tolerance.

Run with `pytest tests/test_acceptance.py -v` to get one pass/fail line per
criterion. Each test is self-contained and seeded; nothing here depends on
the order of the other test modules.
"""

from __future__ import annotations

import math
import time

import numpy as np

from shapetrack import (
    ClassQueryBank,
    DescriptorConfig,
    MatchConfig,
    ObjectSpec,
    QueryRecord,
    SceneSpec,
    ShapePositionDescriptor,
    TrackSet,
    attach_descriptors,
    build_descriptor,
    delta_h,
    descriptor_from_mask,
    generate,
    hungarian,
    inject_identity_swap,
    is_positive_pair,
    linear_trajectory,
    match_tubes,
    orthogonal_prototypes,
    sample_baseline_batch,
    sample_thing_batch,
    score_association,
    tube_iou,
    tubes_from_trackset,
    windowed_tube_pq,
)
from shapetrack import formats
from shapetrack.mask_geometry import AnchorSet

from _oracles import FifoModel, assignment_bruteforce, delta_reference
from conftest import convex_polygon_mask, random_convex_polygon, rect_mask


def by_frame(records) -> list[list[QueryRecord]]:
    groups: dict[int, list[QueryRecord]] = {}
    for r in records:
        groups.setdefault(r.frame, []).append(r)
    return [groups[f] for f in sorted(groups)]


def run_tracker(records, cfg: MatchConfig = MatchConfig()) -> TrackSet:
    ts = TrackSet("instance")
    for frame_records in by_frame(records):
        ts.step_instance(frame_records, cfg)
    return ts


def midbin_anchor_set(
    rng: np.random.Generator, n: int = 150, center=(64.0, 64.0), radius: float = 40.0
) -> AnchorSet:
    """Anchors whose angle and radius both sit well inside a 36 x 12 bin.

    The first anchor is pinned at the largest radius so that, after the 1.25
    ring margin, every radius lands at least a fifth of a bin away from the
    nearest edge. That margin is what lets rotated and rescaled copies bin
    identically despite float roundoff.
    """
    cx, cy = center
    sectors = rng.integers(0, 36, size=n)
    rings = np.concatenate([[9], rng.integers(0, 9, size=n - 1)])
    jit_t = rng.uniform(-0.25, 0.25, size=n)
    jit_r = np.concatenate([[0.0], rng.uniform(-0.25, 0.25, size=n - 1)])
    theta = (sectors + 0.5 + jit_t) * (2 * np.pi / 36)
    rho = (rings + 0.5 + jit_r) / 12
    rho[0] = 0.8  # 1 / 1.25: this anchor alone decides r_max
    r = rho * radius
    pts = np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=1)
    return AnchorSet(anchors=pts, centroid=(cx, cy))


def transformed(anchors: AnchorSet, alpha: float = 0.0, s: float = 1.0) -> AnchorSet:
    cx, cy = anchors.centroid
    dx = anchors.anchors[:, 0] - cx
    dy = anchors.anchors[:, 1] - cy
    ca, sa = np.cos(alpha), np.sin(alpha)
    pts = np.stack(
        [cx + s * (dx * ca - dy * sa), cy + s * (dx * sa + dy * ca)], axis=1
    )
    return AnchorSet(anchors=pts, centroid=(cx, cy))


BIG_FRAME = np.zeros((128, 128), dtype=bool)  # roomy image: no negative bins


def test_criterion_01_assignment_optimality():
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    for _ in range(500):
        rows = int(rng.integers(1, 7))
        cols = int(rng.integers(1, 7))
        m = rng.normal(size=(rows, cols))
        pairs = hungarian(m)
        total = math.fsum(m[r, c] for r, c in pairs)
        want_total, _ = assignment_bruteforce(m)
        assert total == want_total
    assert time.perf_counter() - started < 5.0


def test_criterion_02_histogram_mass():
    rng = np.random.default_rng(202)
    checked = 0
    while checked < 100:
        verts = random_convex_polygon(
            rng, rng.uniform(26, 38), rng.uniform(26, 38), 5.0, 12.0, int(rng.integers(3, 10))
        )
        mask = convex_polygon_mask(64, 64, verts)
        if mask.sum() < 12:  # sliver polygon, try again
            continue
        desc = descriptor_from_mask(mask, 200)
        positive_mass = float(desc.hist[desc.hist > 0].sum() * np.sqrt(desc.d_model))
        assert positive_mass == 200.0
        checked += 1


def test_criterion_03_rotation_permutes_sectors():
    rng = np.random.default_rng(303)
    step = 2 * np.pi / 36
    for trial in range(10):
        anchors = midbin_anchor_set(rng)
        base = build_descriptor(anchors, BIG_FRAME)
        assert (base.hist >= 0).all()
        for k in (1, 9, 18):
            rot = build_descriptor(transformed(anchors, alpha=k * step), BIG_FRAME)
            assert (rot.hist >= 0).all()
            assert np.array_equal(rot.hist, np.roll(base.hist, k, axis=0))


def test_criterion_04_scale_invariance():
    rng = np.random.default_rng(404)
    # frame sized so the margin ring stays in-image even at 7x radius
    frame = np.zeros((568, 568), dtype=bool)
    for trial in range(10):
        anchors = midbin_anchor_set(rng, center=(284.0, 284.0))
        base = build_descriptor(anchors, frame)
        for s in (0.5, 2.0, 7.0):
            scaled = build_descriptor(transformed(anchors, s=s), frame)
            assert np.array_equal(scaled.hist, base.hist)


def test_criterion_05_change_ratio_oracle_and_threshold():
    rng = np.random.default_rng(505)
    dummy = np.zeros(4)
    for _ in range(200):
        u = int(rng.integers(2, 20))
        v = int(rng.integers(1, 9))
        h_t = rng.uniform(-1, 1, size=(u, v))
        h_tn = rng.uniform(-1, 1, size=(u, v))
        a = ShapePositionDescriptor(hist=h_t, r_max=1.0, center=(0, 0), embedded=dummy)
        b = ShapePositionDescriptor(hist=h_tn, r_max=1.0, center=(0, 0), embedded=dummy)
        got = delta_h(a, b)
        want = delta_reference(h_t, h_tn)
        assert abs(got - want) <= 1e-12 * abs(want)

    # exact quarter: ||[3,0] - [4,0]|| / ||[4,0]|| = 1/4, all dyadic
    a = ShapePositionDescriptor(
        hist=np.array([[4.0], [0.0]]), r_max=1.0, center=(0, 0), embedded=dummy
    )
    b = ShapePositionDescriptor(
        hist=np.array([[3.0], [0.0]]), r_max=1.0, center=(0, 0), embedded=dummy
    )
    assert delta_h(a, b) == 0.25
    assert not is_positive_pair(a, b, tau=0.25)  # strict inequality at the boundary
    assert is_positive_pair(a, b, tau=np.nextafter(0.25, 1.0))
    assert not is_positive_pair(a, b, tau=np.nextafter(0.25, 0.0))


def twin_shape_truth():
    """A disc and a bar sharing one embedding prototype, far apart, no noise."""
    proto = orthogonal_prototypes(1, 432)[0]
    disc = ObjectSpec(
        shape="ellipse",
        params=(7.0, 7.0),
        trajectory=linear_trajectory((16.0, 12.0), (2.0, 0.0), 6),
        embedding_prototype=proto,
    )
    bar = ObjectSpec(
        shape="rectangle",
        params=(18.0, 6.0),
        trajectory=linear_trajectory((20.0, 30.0), (2.0, 0.0), 6),
        embedding_prototype=proto,
    )
    truth = generate(SceneSpec(96, 44, 6, (disc, bar), seed=9))
    return attach_descriptors(truth, cfg=DescriptorConfig(d_model=432))


def permuted_frames(truth) -> list[QueryRecord]:
    """Reverse within-frame record order on odd frames."""
    out = []
    for frame_records in by_frame(truth.records):
        if frame_records[0].frame % 2:
            frame_records = list(reversed(frame_records))
        out.extend(frame_records)
    return out


def test_criterion_06_shape_resolves_appearance_ties():
    truth = twin_shape_truth()
    shuffled = permuted_frames(truth)
    plain = run_tracker(shuffled, MatchConfig(use_spa=False))
    spa = run_tracker(shuffled, MatchConfig(use_spa=True))
    assert score_association(plain, truth.tracks, truth.masks).id_switches >= 1
    spa_score = score_association(spa, truth.tracks, truth.masks)
    assert spa_score.id_switches == 0
    assert spa_score.association_accuracy == 1.0


def lane_scene(frames: int = 30) -> SceneSpec:
    """Ten ellipses on a 5 x 2 grid, all drifting with the same velocity."""
    protos = orthogonal_prototypes(10, 16)
    objects = []
    for i in range(10):
        col, row = i % 5, i // 5
        objects.append(
            ObjectSpec(
                shape="ellipse",
                params=(4.5, 3.5),
                trajectory=linear_trajectory(
                    (18.0 + 36 * col, 24.0 + 40 * row), (1.0, 0.3), frames
                ),
                embedding_prototype=protos[i],
                embedding_noise_sigma=0.05,
            )
        )
    return SceneSpec(200, 96, frames, tuple(objects), seed=77)


def test_criterion_07_end_to_end_tracking():
    def run_once():
        truth = attach_descriptors(generate(lane_scene()), cfg=DescriptorConfig(d_model=16))
        preds = run_tracker(truth.records)
        score = score_association(preds, truth.tracks, truth.masks)
        shape = {
            tid: [(f, r.mask_ref) for f, r in preds.tracks[tid]] for tid in preds.track_ids()
        }
        return score, shape

    first_score, first_shape = run_once()
    assert first_score.association_accuracy >= 0.99
    assert first_score.id_switches == 0
    second_score, second_shape = run_once()
    assert second_shape == first_shape
    assert second_score == first_score


def small_scene(n_objects: int, frames: int, seed: int) -> SceneSpec:
    protos = orthogonal_prototypes(n_objects, 8)
    shapes = (("ellipse", (5.0, 4.0)), ("rectangle", (9.0, 6.0)))
    objects = tuple(
        ObjectSpec(
            shape=shapes[k % 2][0],
            params=shapes[k % 2][1],
            trajectory=linear_trajectory((16.0 + 24 * k, 14.0 + 4 * k), (0.8, 0.4), frames),
            embedding_prototype=protos[k],
            embedding_noise_sigma=0.03,
        )
        for k in range(n_objects)
    )
    return SceneSpec(40 + 24 * n_objects, 36 + 4 * n_objects, frames, objects, seed=seed)


def test_criterion_08_sampler_recall():
    corpus = [
        small_scene(2, 2, seed=11),
        small_scene(3, 3, seed=12),
        small_scene(2, 4, seed=13),
        small_scene(3, 6, seed=14),
        small_scene(4, 8, seed=15),
    ]
    for spec in corpus:
        truth = attach_descriptors(generate(spec), cfg=DescriptorConfig(d_model=8))
        video = truth.tracks
        anchors = [(tid, frame) for tid, frame, _ in video.records()]
        strictly_more = 0
        for anchor_ref in anchors:
            task = sample_thing_batch(video, anchor_ref)
            base = sample_baseline_batch(video, anchor_ref, window=1)
            task_count = len(task.positives) + len(task.negatives)
            base_count = len(base.positives) + len(base.negatives)
            assert task_count >= base_count
            strictly_more += task_count > base_count
        if spec.frames > 3:
            assert strictly_more >= 1


def test_criterion_09_batch_partition_and_tau_monotonicity():
    # slowly spinning rectangles on a coarse grid: the change ratio along a
    # track climbs through the whole tau range instead of saturating
    protos = orthogonal_prototypes(6, 12)
    objects = tuple(
        ObjectSpec(
            shape="rectangle",
            params=(16.0, 10.0),
            trajectory=linear_trajectory(
                (20.0 + 45 * (k % 3), 22.0 + 36 * (k // 3)), (1.0, 0.0), 10, spin=0.06
            ),
            embedding_prototype=protos[k],
            embedding_noise_sigma=0.02,
        )
        for k in range(6)
    )
    truth = attach_descriptors(
        generate(SceneSpec(180, 80, 10, objects, seed=21)),
        cfg=DescriptorConfig(u=6, v=2, d_model=12),
    )
    video = truth.tracks
    all_anchors = [(tid, frame) for tid, frame, _ in video.records()]
    all_refs = sorted(r.mask_ref for _, _, r in video.records())
    rng = np.random.default_rng(909)
    picks = rng.choice(len(all_anchors), size=50, replace=False)
    widened = 0
    for idx in picks:
        anchor_ref = all_anchors[idx]
        batch = sample_thing_batch(video, anchor_ref)
        got = [r.mask_ref for r in batch.positives + batch.negatives]
        got.append(batch.anchor.mask_ref)
        assert sorted(got) == all_refs  # exact partition, nothing lost or doubled
        sizes = [
            len(sample_thing_batch(video, anchor_ref, tau=t).positives)
            for t in (0.1, 0.2, 0.3)
        ]
        assert sizes[0] <= sizes[1] <= sizes[2]
        widened += sizes[0] < sizes[2]
    assert widened > 0  # the sweep must actually move, or this proves nothing


def test_criterion_10_queue_contract():
    rng = np.random.default_rng(1010)
    bank = ClassQueryBank(n_q=100, momentum=0.9)
    models = {cid: FifoModel(100) for cid in range(7)}
    for op in range(10_000):
        cid = int(rng.integers(0, 7))
        value = float(op)
        bank.update(cid, np.array([value]))
        models[cid].push(value)
        assert all(len(q) <= 100 for q in bank.queues.values())
        if op % 617 == 0:
            lengths = {c: len(q) for c, q in bank.queues.items()}
            bank.classify(np.array([value]))
            assert {c: len(q) for c, q in bank.queues.items()} == lengths
    for cid, model in models.items():
        got = [float(e[0]) for e in bank.queues.get(cid, [])]
        assert got == model.items


def swap_truth(seed: int):
    protos = orthogonal_prototypes(4, 8)
    objects = tuple(
        ObjectSpec(
            shape="rectangle",
            params=(6.0, 6.0),
            trajectory=linear_trajectory((12.0 + 18 * k, 12.0), (0.5, 0.9), 8),
            embedding_prototype=protos[k],
        )
        for k in range(4)
    )
    return generate(SceneSpec(80, 36, 8, objects, seed=seed))


def test_criterion_11_metric_sanity():
    # identical prediction scores perfectly
    truth = swap_truth(seed=31)
    assert windowed_tube_pq(truth.tracks, truth.tracks, truth.masks, window=4) == 1.0
    clean = score_association(truth.tracks, truth.tracks, truth.masks)
    assert clean.association_accuracy == 1.0
    assert clean.id_switches == 0

    # each injected swap event trades two identities: exactly two switches
    for n_events, swaps in ((1, ((3, 0, 1),)), (2, ((3, 0, 1), (5, 2, 3)))):
        scene = swap_truth(seed=31)
        for frame, a, b in swaps:
            scene = inject_identity_swap(
                scene, frame, scene.track_of_object[a], scene.track_of_object[b]
            )
        preds = run_tracker(scene.records, MatchConfig(use_spa=False))
        score = score_association(preds, scene.tracks, scene.masks)
        assert score.id_switches == 2 * n_events

    # tube matching is permutation optimal for small casts
    rng = np.random.default_rng(1111)
    for _ in range(8):
        masks: dict[str, np.ndarray] = {}

        def random_tubes(prefix: str, count: int):
            items = []
            for tid in range(count):
                frames = sorted(
                    rng.choice(4, size=int(rng.integers(1, 5)), replace=False).tolist()
                )
                for f in frames:
                    x0 = int(rng.integers(0, 12))
                    y0 = int(rng.integers(0, 6))
                    ref = f"{prefix}{tid}f{f}"
                    masks[ref] = rect_mask(20, 12, x0, y0, x0 + int(rng.integers(2, 8)), y0 + 4)
                    items.append(
                        (tid, f, QueryRecord(embedding=np.zeros(1), frame=f, mask_ref=ref))
                    )
            return TrackSet.from_assignments("instance", items)

        preds = random_tubes("p", int(rng.integers(1, 7)))
        gts = random_tubes("g", int(rng.integers(1, 7)))
        pred_tubes = tubes_from_trackset(preds, masks)
        gt_tubes = tubes_from_trackset(gts, masks)
        matrix = np.array(
            [
                [tube_iou(pred_tubes[p], gt_tubes[g]) for g in sorted(gt_tubes)]
                for p in sorted(pred_tubes)
            ]
        )
        want_total, _ = assignment_bruteforce(matrix)
        pairs = match_tubes(preds, gts, masks, iou_floor=0.0)
        assert math.fsum(p.tube_iou for p in pairs) == want_total


def test_criterion_12_format_round_trips(tmp_path):
    rng = np.random.default_rng(1212)

    for i in range(20):  # feature-map binary
        fmap = rng.random((rng.integers(1, 7), rng.integers(1, 7), rng.integers(1, 7)))
        p1, p2 = tmp_path / "a.gvfm", tmp_path / "b.gvfm"
        formats.write_feature_map(p1, fmap)
        formats.write_feature_map(p2, formats.read_feature_map(p1))
        assert p1.read_bytes() == p2.read_bytes()

    for i in range(20):  # embedding-table binary
        emb = rng.random((rng.integers(0, 9), rng.integers(1, 9)))
        p1, p2 = tmp_path / "a.gvqe", tmp_path / "b.gvqe"
        formats.write_embeddings(p1, emb)
        formats.write_embeddings(p2, formats.read_embeddings(p1))
        assert p1.read_bytes() == p2.read_bytes()

    for i in range(20):  # run-length mask JSON
        mask = rng.random((rng.integers(1, 13), rng.integers(1, 13))) < rng.uniform(0.2, 0.8)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        formats.write_mask_rle(p1, mask)
        formats.write_mask_rle(p2, formats.read_mask_rle(p1))
        assert p1.read_bytes() == p2.read_bytes()

    for i in range(20):  # descriptor JSON
        u, v, d = int(rng.integers(2, 13)), int(rng.integers(1, 7)), int(rng.integers(1, 21))
        desc = ShapePositionDescriptor(
            hist=rng.uniform(-1, 1, size=(u, v)),
            r_max=float(rng.uniform(1, 50)),
            center=(float(rng.uniform(0, 30)), float(rng.uniform(0, 30))),
            embedded=rng.uniform(-1, 1, size=d),
        )
        p1, p2 = tmp_path / "ad.json", tmp_path / "bd.json"
        formats.write_descriptor(p1, desc)
        formats.write_descriptor(p2, formats.read_descriptor(p1))
        assert p1.read_bytes() == p2.read_bytes()

    for i in range(20):  # track-set JSON, all three modes
        mode = ("instance", "semantic", "panoptic")[i % 3]
        items = []
        for t in range(int(rng.integers(1, 5))):
            frames = sorted(rng.choice(6, size=int(rng.integers(1, 5)), replace=False).tolist())
            stuff = mode == "semantic" or (mode == "panoptic" and t % 2)
            tid = -(1 + t) if (stuff and mode == "panoptic") else t
            for f in frames:
                items.append(
                    (
                        tid,
                        f,
                        QueryRecord(
                            embedding=np.zeros(2),
                            frame=f,
                            mask_ref=f"m{t}f{f}",
                            kind="stuff" if stuff else "thing",
                            class_id=t if stuff else None,
                        ),
                    )
                )
        ts = TrackSet.from_assignments(mode, items)
        p1, p2 = tmp_path / "at.json", tmp_path / "bt.json"
        formats.write_trackset(p1, ts, f"video{i}")
        got, video = formats.read_trackset(p1)
        formats.write_trackset(p2, got, video)
        assert p1.read_bytes() == p2.read_bytes()
