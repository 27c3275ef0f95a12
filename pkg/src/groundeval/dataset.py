"""Line-delimited JSON dataset records: loading, validation, statistics, baseline."""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .errors import ValidationError
from .geometry import Aabb, GeometryError
from .metrics import ATTRIBUTES, SCENARIOS, GroundingPair, Scenario, classify_scenario

SPLITS = ("train", "val", "test")

# Reported statistics of the released Multi3DRefer dataset; only golden for real exports.
PUBLISHED_VAL_SCENARIO_COUNTS = {"zt_wo_d": 528, "zt_w_d": 378, "st_wo_d": 2099, "st_w_d": 5358, "mt": 2757}
PUBLISHED_ATTRIBUTE_TOTALS = {"spatial": 60028, "color": 41307, "texture": 7121, "shape": 19692}
PUBLISHED_TOTAL_DESCRIPTIONS = 61926
PUBLISHED_SPLIT_COUNTS = {"train": 43838, "val": 11120, "test": 6968}


class DatasetError(ValueError):
    """One or more records failed validation."""

    def __init__(self, diagnostics: Sequence[ValidationError]):
        self.diagnostics = list(diagnostics)
        head = "; ".join(str(d) for d in self.diagnostics[:5])
        more = f" (+{len(self.diagnostics) - 5} more)" if len(self.diagnostics) > 5 else ""
        super().__init__(f"{len(self.diagnostics)} validation error(s): {head}{more}")


def data_path(name: str) -> Path:
    return Path(str(resources.files("groundeval") / "data" / name))


def load_labels(path: Optional[str | Path] = None) -> frozenset[str]:
    """Label vocabulary from a JSON file (``{"labels": [...]}`` or a bare list); nyu40 by default."""
    p = Path(path) if path else data_path("nyu40.json")
    obj = json.loads(p.read_text(encoding="utf-8"))
    labels = obj["labels"] if isinstance(obj, dict) else obj
    return frozenset(str(x) for x in labels)


def load_lexicon(path: Optional[str | Path] = None) -> dict[str, list[str]]:
    p = Path(path) if path else data_path("lexicon_nyu40.json")
    return {str(k): [str(s) for s in v] for k, v in json.loads(p.read_text(encoding="utf-8")).items()}


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    label: str
    aabb: Aabb


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    objects: tuple[SceneObject, ...]

    def object(self, object_id: int) -> SceneObject:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def to_json(self) -> dict:
        return {"scene_id": self.scene_id, "objects": [
            {"object_id": o.object_id, "label": o.label, "aabb": o.aabb.to_json()} for o in self.objects]}


@dataclass(frozen=True)
class DescriptionRecord:
    scene_id: str
    ann_id: int
    description: str
    object_ids: tuple[int, ...]
    target_class: str
    attributes: Mapping[str, bool] = field(default_factory=dict)
    split: str = "val"

    @property
    def key(self) -> tuple[str, int]:
        return (self.scene_id, self.ann_id)

    def to_json(self) -> dict:
        return {"scene_id": self.scene_id, "ann_id": self.ann_id, "description": self.description,
                "object_ids": list(self.object_ids), "target_class": self.target_class,
                "attributes": {a: bool(self.attributes.get(a, False)) for a in ATTRIBUTES}, "split": self.split}


@dataclass(frozen=True)
class PredictionRecord:
    scene_id: str
    ann_id: int
    boxes: tuple[tuple[Aabb, float], ...]

    @property
    def key(self) -> tuple[str, int]:
        return (self.scene_id, self.ann_id)

    def to_json(self) -> dict:
        return {"scene_id": self.scene_id, "ann_id": self.ann_id,
                "boxes": [{"aabb": b.to_json(), "score": s} for b, s in self.boxes]}


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, object]]:
    """Yield ``(line_number, parsed)``; blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield ln, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"invalid JSON: {exc.msg}", line=ln, path=str(path)) from exc


def write_jsonl(records: Iterable, path: str | Path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, "".join(json.dumps(r.to_json() if hasattr(r, "to_json") else r) + "\n" for r in records))


def _require(obj, key, kind, where: dict):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"missing field {key!r}", field=key, **where)
    value = obj[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ValidationError(f"field {key!r} has wrong type {type(value).__name__}", field=key, **where)
    return value


def _parse_aabb(obj, where: dict, field_name: str = "aabb") -> Aabb:
    try:
        return Aabb(tuple(obj["min"]), tuple(obj["max"]))
    except (KeyError, TypeError, GeometryError) as exc:
        raise ValidationError(f"bad box: {exc}", field=field_name, **where) from exc


def parse_scene(obj, labels: frozenset[str], where: dict) -> SceneRecord:
    scene_id = _require(obj, "scene_id", str, where)
    where = {**where, "scene_id": scene_id}
    objects = []
    seen = set()
    for o in _require(obj, "objects", list, where):
        oid = _require(o, "object_id", int, where)
        if oid in seen:
            raise ValidationError(f"duplicate object_id {oid}", field="object_id", **where)
        seen.add(oid)
        label = _require(o, "label", str, where)
        if label not in labels:
            raise ValidationError(f"unknown label {label!r} for object {oid}", field="label", **where)
        objects.append(SceneObject(oid, label, _parse_aabb(_require(o, "aabb", dict, where), where)))
    return SceneRecord(scene_id, tuple(objects))


def parse_description(obj, labels: frozenset[str], where: dict) -> DescriptionRecord:
    scene_id = _require(obj, "scene_id", str, where)
    where = {**where, "scene_id": scene_id}
    ann_id = _require(obj, "ann_id", int, where)
    where["ann_id"] = ann_id
    text = _require(obj, "description", str, where)
    object_ids = _require(obj, "object_ids", list, where)
    if not all(isinstance(i, int) and not isinstance(i, bool) for i in object_ids):
        raise ValidationError("object_ids must be integers", field="object_ids", **where)
    target_class = _require(obj, "target_class", str, where)
    if target_class not in labels:
        raise ValidationError(f"unknown target_class {target_class!r}", field="target_class", **where)
    attrs = obj.get("attributes", {})
    if not isinstance(attrs, dict) or not all(isinstance(attrs.get(a, False), bool) for a in ATTRIBUTES):
        raise ValidationError("attributes must map names to booleans", field="attributes", **where)
    split = obj.get("split", "val")
    if split not in SPLITS:
        raise ValidationError(f"unknown split {split!r}", field="split", **where)
    return DescriptionRecord(scene_id, ann_id, text, tuple(object_ids), target_class,
                             {a: bool(attrs.get(a, False)) for a in ATTRIBUTES}, split)


def parse_prediction(obj, where: dict) -> PredictionRecord:
    scene_id = _require(obj, "scene_id", str, where)
    where = {**where, "scene_id": scene_id}
    ann_id = _require(obj, "ann_id", int, where)
    where["ann_id"] = ann_id
    boxes = []
    for b in _require(obj, "boxes", list, where):
        box = _parse_aabb(_require(b, "aabb", dict, where), where)
        score = _require(b, "score", (int, float), where)
        if isinstance(score, bool) or not 0.0 <= score <= 1.0:
            raise ValidationError(f"score {score} outside [0, 1]", field="score", **where)
        boxes.append((box, float(score)))
    return PredictionRecord(scene_id, ann_id, tuple(boxes))


def _collect(path, parse) -> tuple[list, list[ValidationError]]:
    records, diagnostics = [], []
    try:
        for ln, obj in iter_jsonl(path):
            try:
                records.append(parse(obj, {"line": ln, "path": str(path)}))
            except ValidationError as exc:
                diagnostics.append(exc)
    except ValidationError as exc:
        diagnostics.append(exc)
    return records, diagnostics


def validate_dataset(scene_path, description_path, labels: Optional[frozenset[str]] = None):
    """Parse and cross-check both files; returns ``(scenes, descriptions, diagnostics)``."""
    labels = labels if labels is not None else load_labels()
    scene_list, diagnostics = _collect(scene_path, lambda o, w: parse_scene(o, labels, w))
    scenes: dict[str, SceneRecord] = {}
    for s in scene_list:
        if s.scene_id in scenes:
            diagnostics.append(ValidationError("duplicate scene_id", s.scene_id, field="scene_id", path=str(scene_path)))
        scenes[s.scene_id] = s
    descriptions, more = _collect(description_path, lambda o, w: parse_description(o, labels, w))
    diagnostics += more
    seen: set[tuple[str, int]] = set()
    for d in descriptions:
        if d.key in seen:
            diagnostics.append(ValidationError("duplicate (scene_id, ann_id)", d.scene_id, d.ann_id, "ann_id",
                                               path=str(description_path)))
        seen.add(d.key)
        scene = scenes.get(d.scene_id)
        if scene is None:
            diagnostics.append(ValidationError("unknown scene", d.scene_id, d.ann_id, "scene_id",
                                               path=str(description_path)))
            continue
        ids = {o.object_id for o in scene.objects}
        for oid in d.object_ids:
            if oid not in ids:
                diagnostics.append(ValidationError(f"dangling object_id {oid}", d.scene_id, d.ann_id, "object_ids",
                                                   path=str(description_path)))
        if len(set(d.object_ids)) != len(d.object_ids):
            diagnostics.append(ValidationError("repeated object_id", d.scene_id, d.ann_id, "object_ids",
                                               path=str(description_path)))
    return scenes, descriptions, diagnostics


def load_dataset(scene_path, description_path, labels: Optional[frozenset[str]] = None):
    """Load and validate; raises :class:`DatasetError` listing every problem."""
    scenes, descriptions, diagnostics = validate_dataset(scene_path, description_path, labels)
    if diagnostics:
        raise DatasetError(diagnostics)
    return scenes, descriptions


def load_predictions(path, descriptions: Sequence[DescriptionRecord]) -> dict[tuple[str, int], PredictionRecord]:
    records, diagnostics = _collect(path, parse_prediction)
    known = {d.key for d in descriptions}
    out: dict[tuple[str, int], PredictionRecord] = {}
    for r in records:
        if r.key not in known:
            diagnostics.append(ValidationError("prediction for unknown description", r.scene_id, r.ann_id,
                                               "ann_id", path=str(path)))
        elif r.key in out:
            diagnostics.append(ValidationError("duplicate prediction record", r.scene_id, r.ann_id,
                                               "ann_id", path=str(path)))
        out[r.key] = r
    if diagnostics:
        raise DatasetError(diagnostics)
    return out


def scenario_of(d: DescriptionRecord, scenes: Mapping[str, SceneRecord]) -> Scenario:
    try:
        return classify_scenario(d.object_ids, d.target_class, scenes[d.scene_id])
    except ValidationError as exc:
        raise ValidationError(exc.args[0], d.scene_id, d.ann_id, "object_ids") from exc


def build_pairs(scenes: Mapping[str, SceneRecord], descriptions: Sequence[DescriptionRecord],
                predictions: Mapping[tuple[str, int], PredictionRecord]) -> list[GroundingPair]:
    """One pair per description; GT boxes come from the referenced scene objects."""
    pairs = []
    for d in descriptions:
        scene = scenes[d.scene_id]
        gts = tuple(scene.object(oid).aabb for oid in d.object_ids)
        pred = predictions.get(d.key)
        pairs.append(GroundingPair(d.scene_id, d.ann_id, scenario_of(d, scenes), gts,
                                   pred.boxes if pred is not None else ()))
    return pairs


@dataclass
class StatReport:
    splits: dict[str, dict]
    total: dict

    def to_json(self) -> dict:
        return {"splits": self.splits, "total": self.total}


def _summary(descs: Sequence[DescriptionRecord], scenes: Mapping[str, SceneRecord]) -> dict:
    scenario = Counter(scenario_of(d, scenes).value for d in descs)
    attrs = Counter(a for d in descs for a in ATTRIBUTES if d.attributes.get(a, False))
    scene_ids = {d.scene_id for d in descs}
    targets = {(d.scene_id, oid) for d in descs for oid in d.object_ids}
    n_desc, n_scene, n_obj = len(descs), len(scene_ids), len(targets)
    auto = sum(1 for d in descs if not d.object_ids and zero_target_autocheck(d, scenes[d.scene_id]) == AUTO_CLEAR)
    return {
        "descriptions": n_desc,
        "scenes": n_scene,
        "objects": n_obj,
        "scene_objects": sum(len(scenes[s].objects) for s in scene_ids),
        "scenarios": {s.value: scenario.get(s.value, 0) for s in SCENARIOS},
        "attributes": {a: attrs.get(a, 0) for a in ATTRIBUTES},
        "zero_target_auto_clear": auto,
        "avg_objects_per_scene": n_obj / n_scene if n_scene else None,
        "avg_descriptions_per_scene": n_desc / n_scene if n_scene else None,
        "avg_descriptions_per_object": n_desc / n_obj if n_obj else None,
    }


def compute_stats(scenes: Mapping[str, SceneRecord], descriptions: Sequence[DescriptionRecord]) -> StatReport:
    """Counts per split and scenario.

    ``objects`` counts distinct referenced target objects, the convention under
    which per-scene and per-object averages are reported for the dataset.
    """
    ordered = sorted(descriptions, key=lambda d: d.key)
    splits = {s: _summary([d for d in ordered if d.split == s], scenes) for s in SPLITS}
    return StatReport(splits, _summary(ordered, scenes))


def check_against_published(report: StatReport) -> list[str]:
    """Mismatches between ``report`` and the released dataset's published counts."""
    problems = []
    for k, v in PUBLISHED_VAL_SCENARIO_COUNTS.items():
        got = report.splits["val"]["scenarios"][k]
        if got != v:
            problems.append(f"val {k}: {got} != {v}")
    for k, v in PUBLISHED_ATTRIBUTE_TOTALS.items():
        got = report.total["attributes"][k]
        if got != v:
            problems.append(f"attribute {k}: {got} != {v}")
    if report.total["descriptions"] != PUBLISHED_TOTAL_DESCRIPTIONS:
        problems.append(f"total descriptions: {report.total['descriptions']} != {PUBLISHED_TOTAL_DESCRIPTIONS}")
    for k, v in PUBLISHED_SPLIT_COUNTS.items():
        got = report.splits[k]["descriptions"]
        if got != v:
            problems.append(f"{k} descriptions: {got} != {v}")
    return problems


AUTO_CLEAR = "auto_clear"
NEEDS_REVIEW = "needs_review"


def zero_target_autocheck(candidate: DescriptionRecord, scene: SceneRecord) -> str:
    """A candidate negative pair needs a human only if its target class occurs in the scene."""
    if any(o.label == candidate.target_class for o in scene.objects):
        return NEEDS_REVIEW
    return AUTO_CLEAR


_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _contains(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    k = len(phrase)
    return k > 0 and any(list(tokens[i:i + k]) == list(phrase) for i in range(len(tokens) - k + 1))


def mentioned_classes(text: str, lexicon: Mapping[str, Sequence[str]]) -> set[str]:
    tokens = tokenize(text)
    return {cls for cls, synonyms in lexicon.items() if any(_contains(tokens, tokenize(s)) for s in synonyms)}


def lexical_baseline(description: DescriptionRecord, scene: SceneRecord,
                     lexicon: Mapping[str, Sequence[str]]) -> PredictionRecord:
    """Predict every object whose class is named in the description, with score 1."""
    classes = mentioned_classes(description.description, lexicon)
    boxes = tuple((o.aabb, 1.0) for o in scene.objects if o.label in classes)
    return PredictionRecord(description.scene_id, description.ann_id, boxes)
