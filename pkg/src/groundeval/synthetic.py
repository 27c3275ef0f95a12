"""Seeded random datasets for smoke tests and benchmarks."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import DescriptionRecord, PredictionRecord, SceneObject, SceneRecord, write_jsonl
from .geometry import Aabb, PointCloud
from .metrics import ATTRIBUTES
from .ply import write_ply

LABELS = ("chair", "table", "sofa", "bed", "desk", "cabinet", "lamp", "door")


def random_box(rng: np.random.Generator, room: float = 8.0) -> Aabb:
    lo = rng.uniform(0.0, room, size=3) * np.array([1.0, 1.0, 0.2])
    size = rng.uniform(0.3, 1.5, size=3)
    return Aabb(tuple(lo), tuple(lo + size))


def jitter_box(box: Aabb, rng: np.random.Generator, scale: float = 0.15) -> Aabb:
    lo = np.asarray(box.min_corner) + rng.normal(0.0, scale, size=3) * box.extent
    hi = np.asarray(box.max_corner) + rng.normal(0.0, scale, size=3) * box.extent
    return Aabb(tuple(np.minimum(lo, hi)), tuple(np.maximum(lo, hi)))


def random_scene(scene_id: str, rng: np.random.Generator, n_objects: int = 10) -> SceneRecord:
    objects = tuple(SceneObject(i, str(rng.choice(LABELS)), random_box(rng)) for i in range(n_objects))
    return SceneRecord(scene_id, objects)


def random_descriptions(scene: SceneRecord, rng: np.random.Generator, n: int = 8, split: str = "val"):
    out = []
    for ann in range(n):
        label = str(rng.choice(LABELS))
        same = [o.object_id for o in scene.objects if o.label == label]
        k = int(rng.integers(0, len(same) + 1)) if same else 0
        ids = tuple(sorted(int(i) for i in rng.choice(same, size=k, replace=False))) if k else ()
        flags = {a: bool(rng.random() < 0.3) for a in ATTRIBUTES}
        out.append(DescriptionRecord(scene.scene_id, ann, f"the {label}", ids, label, flags, split))
    return out


def random_predictions(scene: SceneRecord, desc: DescriptionRecord, rng: np.random.Generator) -> PredictionRecord:
    boxes = []
    for oid in desc.object_ids:
        if rng.random() < 0.8:
            boxes.append((jitter_box(scene.object(oid).aabb, rng), float(rng.uniform(0.05, 1.0))))
    for _ in range(int(rng.integers(0, 3))):
        boxes.append((random_box(rng), float(rng.uniform(0.0, 0.6))))
    return PredictionRecord(desc.scene_id, desc.ann_id, tuple(boxes))


def scene_cloud(scene: SceneRecord, rng: np.random.Generator, points_per_object: int = 400) -> PointCloud:
    pos, col = [], []
    for o in scene.objects:
        lo, hi = np.asarray(o.aabb.min_corner), np.asarray(o.aabb.max_corner)
        pos.append(rng.uniform(lo, hi, size=(points_per_object, 3)))
        col.append(np.tile(rng.uniform(0.0, 1.0, size=3), (points_per_object, 1)))
    return PointCloud(np.concatenate(pos), np.concatenate(col))


def write_synthetic(out_dir: Path, n_scenes: int, rng: np.random.Generator) -> list[Path]:
    out_dir = Path(out_dir)
    (out_dir / "ply").mkdir(exist_ok=True)
    scenes, descs, preds = [], [], []
    for s in range(n_scenes):
        scene = random_scene(f"scene{s:04d}_00", rng)
        split = ("train", "val", "test")[s % 3]
        ds = random_descriptions(scene, rng, split=split)
        scenes.append(scene)
        descs += ds
        preds += [random_predictions(scene, d, rng) for d in ds]
        write_ply(scene_cloud(scene, rng), out_dir / "ply" / f"{scene.scene_id}.ply")
    paths = [out_dir / "scenes.jsonl", out_dir / "descriptions.jsonl", out_dir / "predictions.jsonl"]
    for records, p in zip((scenes, descs, preds), paths):
        write_jsonl(records, p)
    return paths + [out_dir / "ply"]
