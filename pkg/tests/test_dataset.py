import json
import random

import pytest

from conftest import write_lines
from groundeval.dataset import (AUTO_CLEAR, NEEDS_REVIEW, PUBLISHED_SPLIT_COUNTS, PUBLISHED_VAL_SCENARIO_COUNTS,
                                DatasetError, DescriptionRecord, SceneObject, SceneRecord, StatReport, build_pairs,
                                check_against_published, compute_stats, lexical_baseline, load_dataset, load_labels,
                                load_lexicon, load_predictions, scenario_of, validate_dataset,
                                zero_target_autocheck)
from groundeval.geometry import Aabb
from groundeval.metrics import Scenario, evaluate


def test_bundled_vocabularies():
    nyu = load_labels()
    assert len(nyu) == 40 and "chair" in nyu and "otherprop" in nyu
    from groundeval.dataset import data_path

    assert len(load_labels(data_path("scanrefer18.json"))) == 18
    assert set(load_lexicon()) == nyu


def test_fixture_loads_clean(fixture_paths):
    scenes, descs, diagnostics = validate_dataset(fixture_paths["scenes"], fixture_paths["descriptions"])
    assert diagnostics == []
    assert len(scenes) == 2 and len(descs) == 12
    assert len(load_predictions(fixture_paths["predictions"], descs)) == 11


def corrupt(tmp_path, fixture_paths, edit):
    lines = [json.loads(x) for x in fixture_paths["descriptions"].read_text().splitlines()]
    edit(lines)
    return write_lines(tmp_path / "d.jsonl", lines)


def test_dangling_object_id(tmp_path, fixture_paths):
    def edit(lines):
        lines[2]["object_ids"] = [99]

    path = corrupt(tmp_path, fixture_paths, edit)
    with pytest.raises(DatasetError) as info:
        load_dataset(fixture_paths["scenes"], path)
    (d,) = info.value.diagnostics
    assert (d.scene_id, d.ann_id, d.field) == ("scene0000_00", 2, "object_ids")
    assert "99" in str(d)


def test_duplicate_ann_id(tmp_path, fixture_paths):
    path = corrupt(tmp_path, fixture_paths, lambda lines: lines.append(dict(lines[0])))
    with pytest.raises(DatasetError) as info:
        load_dataset(fixture_paths["scenes"], path)
    assert "duplicate" in str(info.value.diagnostics[0])
    assert info.value.diagnostics[0].ann_id == 0


def test_unknown_label_and_parse_error(tmp_path, fixture_paths):
    scenes = [json.loads(x) for x in fixture_paths["scenes"].read_text().splitlines()]
    scenes[1]["objects"][0]["label"] = "spaceship"
    bad = write_lines(tmp_path / "s.jsonl", scenes)
    with bad.open("a") as f:
        f.write("{not json\n")
    _, _, diagnostics = validate_dataset(bad, fixture_paths["descriptions"])
    msgs = [str(d) for d in diagnostics]
    assert any("spaceship" in m and "scene0001_00" in m for m in msgs)
    assert any("invalid JSON" in m and ":3" in m for m in msgs)


def test_every_diagnostic_has_coordinates(tmp_path, fixture_paths):
    def edit(lines):
        lines[0]["target_class"] = "unicorn"
        lines[1]["split"] = "dev"
        lines[3]["attributes"] = {"spatial": "yes"}
        del lines[4]["description"]

    path = corrupt(tmp_path, fixture_paths, edit)
    _, _, diagnostics = validate_dataset(fixture_paths["scenes"], path)
    assert len(diagnostics) == 4
    for d in diagnostics:
        assert d.scene_id is not None and d.ann_id is not None and d.field is not None


def test_prediction_cross_reference(tmp_path, fixture_paths):
    _, descs = load_dataset(fixture_paths["scenes"], fixture_paths["descriptions"])
    path = write_lines(tmp_path / "p.jsonl", [{"scene_id": "scene0000_00", "ann_id": 77, "boxes": []},
                                               {"scene_id": "scene0000_00", "ann_id": 0,
                                                "boxes": [{"aabb": {"min": [0, 0, 0], "max": [1, 1, 1]},
                                                           "score": 1.5}]}])
    with pytest.raises(DatasetError) as info:
        load_predictions(path, descs)
    assert {d.ann_id for d in info.value.diagnostics} == {77, 0}


def test_stats_on_fixture(fixture_paths, expected):
    scenes, descs = load_dataset(fixture_paths["scenes"], fixture_paths["descriptions"])
    report = compute_stats(scenes, descs)
    for split, want in expected["stats"].items():
        if split not in ("val", "train", "test"):
            continue
        got = report.splits[split]
        for k, v in want.items():
            assert got[k] == v, (split, k)
    assert report.total["descriptions"] == 12
    assert report.total["zero_target_auto_clear"] == expected["stats"]["zero_target_auto_clear"]
    for split in ("train", "val", "test"):
        s = report.splits[split]
        assert sum(s["scenarios"].values()) == s["descriptions"]
    assert report.splits["val"]["avg_descriptions_per_object"] == 6 / 5


def test_stats_order_invariant(fixture_paths):
    scenes, descs = load_dataset(fixture_paths["scenes"], fixture_paths["descriptions"])
    shuffled = list(descs)
    random.Random(0).shuffle(shuffled)
    assert compute_stats(scenes, shuffled).to_json() == compute_stats(scenes, descs).to_json()


def fake_report(val, attrs, total, splits):
    def part(n, scen=None, att=None):
        return {"descriptions": n, "scenarios": scen or {}, "attributes": att or {}}

    return StatReport({"train": part(splits["train"]), "val": part(splits["val"], val), "test": part(splits["test"])},
                      part(total, None, attrs))


def test_check_against_published_golden_values():
    ok = fake_report(dict(PUBLISHED_VAL_SCENARIO_COUNTS), {"spatial": 60028, "color": 41307, "texture": 7121,
                                                       "shape": 19692}, 61926, dict(PUBLISHED_SPLIT_COUNTS))
    assert check_against_published(ok) == []
    assert sum(PUBLISHED_VAL_SCENARIO_COUNTS.values()) == PUBLISHED_SPLIT_COUNTS["val"]
    assert sum(PUBLISHED_SPLIT_COUNTS.values()) == 61926
    bad = fake_report({**PUBLISHED_VAL_SCENARIO_COUNTS, "mt": 2756}, ok.total["attributes"], 61926,
                      dict(PUBLISHED_SPLIT_COUNTS))
    assert check_against_published(bad) == ["val mt: 2756 != 2757"]


def scene(*labels):
    return SceneRecord("s", tuple(SceneObject(i, lbl, Aabb((3 * i, 0, 0), (3 * i + 1, 1, 1)))
                                  for i, lbl in enumerate(labels)))


def desc(text="", ids=(), cls="chair"):
    return DescriptionRecord("s", 0, text, tuple(ids), cls)


def test_zero_target_autocheck():
    assert zero_target_autocheck(desc(cls="sofa"), scene("chair", "table")) == AUTO_CLEAR
    assert zero_target_autocheck(desc(cls="chair"), scene("chair", "chair")) == NEEDS_REVIEW


def test_autocheck_partition_on_fixture(fixture_paths):
    scenes, descs = load_dataset(fixture_paths["scenes"], fixture_paths["descriptions"])
    zt = [d for d in descs if not d.object_ids]
    verdicts = [zero_target_autocheck(d, scenes[d.scene_id]) for d in zt]
    assert verdicts.count(AUTO_CLEAR) == 2 and verdicts.count(NEEDS_REVIEW) == 2
    for d, v in zip(zt, verdicts):
        if v == AUTO_CLEAR:
            assert scenario_of(d, {d.scene_id: scenes[d.scene_id]}) is Scenario.ZT_WITHOUT_DISTRACTOR


def test_lexical_baseline():
    lex = load_lexicon()
    sc = scene("chair", "chair", "table", "sofa")
    assert len(lexical_baseline(desc("The chair next to the table."), sc, lex).boxes) == 3
    assert lexical_baseline(desc("a thing over there"), sc, lex).boxes == ()
    assert len(lexical_baseline(desc("the comfy couch"), sc, lex).boxes) == 1
    assert lexical_baseline(desc("the armchair", cls="chair"), sc, lex).boxes == ()
    assert all(s == 1.0 for _, s in lexical_baseline(desc("chairs"), sc, lex).boxes)


def test_baseline_pipeline_smoke(fixture_paths):
    scenes, descs = load_dataset(fixture_paths["scenes"], fixture_paths["descriptions"])
    lex = load_lexicon()
    preds = {d.key: lexical_baseline(d, scenes[d.scene_id], lex) for d in descs}
    report = evaluate(build_pairs(scenes, descs, preds))
    assert set(report.f1) == {"0.25", "0.50"}
