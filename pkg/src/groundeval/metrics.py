"""Flexible-count grounding metrics.

Each description-scene pair is scored with its own F1 after a one-to-one
matching of predicted and ground-truth boxes. Scenario scores are means over
pairs and "all" is the mean over every pair.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterable, Mapping, Optional, Sequence

from . import __version__
from .errors import ValidationError
from .geometry import Aabb, iou
from .matching import Assignment, CostMatrix, build_cost_matrix, hungarian, matched_ious

if TYPE_CHECKING:
    from .dataset import SceneRecord


class Scenario(str, Enum):
    ZT_WITHOUT_DISTRACTOR = "zt_wo_d"
    ZT_WITH_DISTRACTOR = "zt_w_d"
    ST_WITHOUT_DISTRACTOR = "st_wo_d"
    ST_WITH_DISTRACTOR = "st_w_d"
    MT = "mt"

    @property
    def n_targets(self) -> str:
        return self.value[:2]


SCENARIOS: tuple[Scenario, ...] = tuple(Scenario)
ALL = "all"
DEFAULT_IOU_THRESHOLDS = (0.25, 0.5)
DEFAULT_PREDICTION_THRESHOLD = 0.1


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    prediction_threshold: float = DEFAULT_PREDICTION_THRESHOLD
    strict_iou: bool = True
    strict_score: bool = True

    def __post_init__(self):
        taus = tuple(sorted(float(t) for t in self.iou_thresholds))
        if not taus or any(not 0.0 < t <= 1.0 for t in taus):
            raise ValueError(f"IoU thresholds must lie in (0, 1], got {self.iou_thresholds}")
        if not 0.0 <= self.prediction_threshold <= 1.0:
            raise ValueError(f"prediction threshold must lie in [0, 1], got {self.prediction_threshold}")
        object.__setattr__(self, "iou_thresholds", taus)
        object.__setattr__(self, "prediction_threshold", float(self.prediction_threshold))

    def to_json(self) -> dict:
        d = asdict(self)
        d["iou_thresholds"] = list(self.iou_thresholds)
        return d


@dataclass(frozen=True)
class GroundingPair:
    scene_id: str
    ann_id: int
    scenario: Scenario
    gt_boxes: tuple[Aabb, ...]
    predictions: tuple[tuple[Aabb, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))
        object.__setattr__(self, "predictions", tuple((b, float(s)) for b, s in self.predictions))
        expected = {0: "zt", 1: "st"}.get(len(self.gt_boxes), "mt")
        if self.scenario.n_targets != expected:
            raise ValidationError(
                f"scenario {self.scenario.value} inconsistent with {len(self.gt_boxes)} GT boxes",
                self.scene_id, self.ann_id, "scenario",
            )
        for _, s in self.predictions:
            if not 0.0 <= s <= 1.0:
                raise ValidationError(f"score {s} outside [0, 1]", self.scene_id, self.ann_id, "score")

    def with_predictions(self, predictions) -> "GroundingPair":
        return GroundingPair(self.scene_id, self.ann_id, self.scenario, self.gt_boxes, tuple(predictions))


@dataclass(frozen=True)
class PairResult:
    tp: int
    n_pred: int
    n_gt: int
    f1: float


def classify_scenario(target_ids: Sequence[int], target_class: Optional[str], scene: "SceneRecord") -> Scenario:
    labels = {o.object_id: o.label for o in scene.objects}
    for oid in target_ids:
        if oid not in labels:
            raise ValidationError(f"target object {oid} not in scene", scene.scene_id, None, "object_ids")
    targets = set(target_ids)
    if len(targets) == 0:
        if any(lbl == target_class for lbl in labels.values()):
            return Scenario.ZT_WITH_DISTRACTOR
        return Scenario.ZT_WITHOUT_DISTRACTOR
    if len(targets) == 1:
        (tid,) = targets
        cls = labels[tid]
        if any(lbl == cls and oid != tid for oid, lbl in labels.items()):
            return Scenario.ST_WITH_DISTRACTOR
        return Scenario.ST_WITHOUT_DISTRACTOR
    return Scenario.MT


def _above(value: float, threshold: float, strict: bool) -> bool:
    return value > threshold if strict else value >= threshold


def filter_predictions(predictions: Iterable[tuple[Aabb, float]], config: EvalConfig) -> list[Aabb]:
    return [b for b, s in predictions if _above(s, config.prediction_threshold, config.strict_score)]


Solver = Callable[[CostMatrix], Assignment]


def matched_pair_ious(gt_boxes: Sequence[Aabb], pred_boxes: Sequence[Aabb], solver: Solver = hungarian) -> list[float]:
    """IoUs of the optimally matched (prediction, GT) pairs."""
    if not gt_boxes or not pred_boxes:
        return []
    cost = build_cost_matrix(pred_boxes, gt_boxes)
    return [v for _, _, v in matched_ious(cost, solver(cost))]


def _result(n_pred: int, n_gt: int, ious: Sequence[float], tau_eval: float, strict: bool) -> PairResult:
    if n_gt == 0:
        # recall pinned to 1, precision 1 only for an empty prediction set
        return PairResult(0, n_pred, 0, 1.0 if n_pred == 0 else 0.0)
    tp = sum(1 for v in ious if _above(v, tau_eval, strict))
    return PairResult(tp, n_pred, n_gt, 2.0 * tp / (n_pred + n_gt))


def evaluate_pair(pair: GroundingPair, tau_eval: float, config: EvalConfig = EvalConfig(),
                  solver: Solver = hungarian) -> PairResult:
    """Score one pair whose ``predictions`` are already filtered by score."""
    boxes = [b for b, _ in pair.predictions]
    ious = matched_pair_ious(pair.gt_boxes, boxes, solver)
    return _result(len(boxes), len(pair.gt_boxes), ious, tau_eval, config.strict_iou)


def _evaluate_all_thresholds(args) -> tuple[Scenario, list[PairResult]]:
    pair, config = args
    boxes = filter_predictions(pair.predictions, config)
    ious = matched_pair_ious(pair.gt_boxes, boxes)
    return pair.scenario, [
        _result(len(boxes), len(pair.gt_boxes), ious, tau, config.strict_iou) for tau in config.iou_thresholds
    ]


def aggregate(results: Sequence[tuple[Scenario, PairResult]], tau_eval: Optional[float] = None) -> dict:
    """Scenario means and the overall mean. Empty scenarios come back as ``None``."""
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    by_scenario: dict[Scenario, list[float]] = {s: [] for s in SCENARIOS}
    for scenario, r in results:
        by_scenario[Scenario(scenario)].append(r.f1)
    scores: dict[str, Optional[float]] = {
        s.value: (math.fsum(v) / len(v) if v else None) for s, v in by_scenario.items()
    }
    scores[ALL] = math.fsum(r.f1 for _, r in results) / len(results)
    return scores


def scenario_counts(scenarios: Iterable[Scenario]) -> dict[str, int]:
    counts = {s.value: 0 for s in SCENARIOS}
    for s in scenarios:
        counts[Scenario(s).value] += 1
    return counts


def tau_key(tau: float) -> str:
    return f"{tau:.2f}" if round(tau, 2) == tau else repr(tau)


@dataclass
class EvalReport:
    config: EvalConfig
    f1: dict[str, dict[str, Optional[float]]]
    counts: dict[str, int]
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "f1": self.f1,
            "counts": self.counts,
            "version": __version__,
            "notes": self.notes,
        }


def evaluate(pairs: Sequence[GroundingPair], config: EvalConfig = EvalConfig(), workers: int = 1) -> EvalReport:
    """Filter, match and aggregate every pair at every configured IoU threshold."""
    if not pairs:
        raise ValueError("no pairs to evaluate")
    jobs = [(p, config) for p in pairs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_pair = list(pool.map(_evaluate_all_thresholds, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        per_pair = [_evaluate_all_thresholds(j) for j in jobs]
    f1 = {}
    for k, tau in enumerate(config.iou_thresholds):
        f1[tau_key(tau)] = aggregate([(s, rs[k]) for s, rs in per_pair], tau)
    counts = scenario_counts(s for s, _ in per_pair)
    notes = []
    empty = [s for s, n in counts.items() if n == 0]
    if empty:
        notes.append("scenarios without pairs are null and excluded from 'all': " + ", ".join(empty))
    return EvalReport(config, f1, counts, notes)


def accuracy_single_target(pairs: Sequence[GroundingPair], tau: float) -> float:
    """Fraction of pairs whose top-scoring box reaches IoU >= tau with the single GT box."""
    if not pairs:
        raise ValueError("no pairs")
    hits = 0
    for p in pairs:
        if len(p.gt_boxes) != 1:
            raise ValidationError(f"expected exactly one GT box, got {len(p.gt_boxes)}", p.scene_id, p.ann_id)
        if not p.predictions:
            continue
        best = max(range(len(p.predictions)), key=lambda k: (p.predictions[k][1], -k))
        if iou(p.predictions[best][0], p.gt_boxes[0]) >= tau:
            hits += 1
    return hits / len(pairs)


SWEEP_COLUMNS = ("tau_pred",) + tuple(s.value for s in SCENARIOS) + (ALL,)


def threshold_sweep(pairs: Sequence[GroundingPair], tau_pred_grid: Sequence[float], tau_eval: float,
                    config: EvalConfig = EvalConfig(), workers: int = 1) -> list[dict]:
    """One aggregate row per prediction threshold."""
    grid = [float(t) for t in tau_pred_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("prediction threshold grid must be ascending")
    rows = []
    for t in grid:
        cfg = EvalConfig((tau_eval,), t, config.strict_iou, config.strict_score)
        report = evaluate(pairs, cfg, workers)
        row = {"tau_pred": t}
        row.update(report.f1[tau_key(tau_eval)])
        rows.append(row)
    return rows


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(["" if row[c] is None else repr(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


ATTRIBUTES = ("spatial", "color", "texture", "shape")


def attribute_breakdown(pairs: Sequence[GroundingPair], attributes: Mapping[tuple[str, int], Mapping[str, bool]],
                        config: EvalConfig = EvalConfig()) -> dict:
    """F1 per attribute over descriptions flagged with exactly one attribute."""
    groups: dict[str, list[GroundingPair]] = {a: [] for a in ATTRIBUTES}
    for p in pairs:
        flags = attributes.get((p.scene_id, p.ann_id), {})
        on = [a for a in ATTRIBUTES if flags.get(a, False)]
        if len(on) == 1:
            groups[on[0]].append(p)
    table: dict = {"f1": {}, "counts": {a: len(g) for a, g in groups.items()}}
    for tau in config.iou_thresholds:
        row: dict[str, Optional[float]] = {}
        for a, group in groups.items():
            if not group:
                row[a] = None
                continue
            scores = [_evaluate_all_thresholds((p, EvalConfig((tau,), config.prediction_threshold,
                                                              config.strict_iou, config.strict_score)))[1][0].f1
                      for p in group]
            row[a] = math.fsum(scores) / len(scores)
        table["f1"][tau_key(tau)] = row
    return table
