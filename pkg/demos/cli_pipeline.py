"""The command-line surface, end to end, in a temp directory.

Same entry points as the installed `shapetrack` command: synthesize a scene
to disk, track it, score the result, and emit training batches. Every file
involved is a documented interchange format, so each stage can be swapped
for real detector output.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from shapetrack import ObjectSpec, SceneSpec, linear_trajectory, orthogonal_prototypes
from shapetrack import formats
from shapetrack.cli import main


def scene_spec():
    protos = orthogonal_prototypes(3, 8)
    objects = tuple(
        ObjectSpec(
            shape="ellipse",
            params=(5.0, 4.0),
            trajectory=linear_trajectory((14.0 + 22 * k, 14.0 + 5 * k), (1.0, 0.5), 8),
            embedding_prototype=protos[k],
            embedding_noise_sigma=0.02,
        )
        for k in range(3)
    )
    return SceneSpec(88, 52, 8, objects, seed=17)


def run(argv):
    print(f"$ shapetrack {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"exit {code}"


def main_demo():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        spec_path = root / "spec.json"
        formats.write_scene_spec(spec_path, scene_spec())

        scene = root / "scene"
        run(["synth", str(spec_path), "--out", str(scene)])
        n_masks = len(list((scene / "masks").glob("*.json")))
        print(f"  -> {n_masks} masks, embeddings.gvqe, records.json, gt_tracks.json")

        tracks = root / "tracks.json"
        run(["track", str(scene), "--out", str(tracks)])
        got, video = formats.read_trackset(tracks)
        print(f"  -> {len(got.track_ids())} tracks for video {video!r}")

        report_path = root / "report.json"
        run(["eval", str(tracks), str(scene), "--out", str(report_path)])
        report = json.loads(report_path.read_text())
        print(f"  -> accuracy {report['association_accuracy']}, "
              f"{report['id_switches']} switches, tube PQ {report['tube_pq']:.3f}")

        batches = root / "batches.jsonl"
        run(["sample", str(scene), "--strategy", "task", "--out", str(batches)])
        rows = formats.read_batches(batches)
        pos, neg = rows[0][1], rows[0][2]
        print(f"  -> {len(rows)} anchors; first batch: "
              f"{len(pos)} positives, {len(neg)} negatives")


if __name__ == "__main__":
    main_demo()
