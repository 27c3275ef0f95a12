"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .dataset import (DatasetError, build_pairs, check_against_published, compute_stats, lexical_baseline, load_dataset,
                      load_labels, load_lexicon, load_predictions, validate_dataset, write_jsonl)
from .errors import ValidationError
from .io import atomic_write_text
from .losses import DEFAULT_TAU_TRAIN, Strategy, assign_training_targets, gradient_selftest
from .metrics import (DEFAULT_IOU_THRESHOLDS, DEFAULT_PREDICTION_THRESHOLD, EvalConfig, attribute_breakdown,
                      evaluate, sweep_csv, threshold_sweep)
from .renderer import RenderConfig, render_proposal, write_image

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(OSError):
    pass


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" not in text:
        return list(parse_floats(text))
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    n = int(round((stop - start) / step))
    return [round(start + k * step, 12) for k in range(n + 1)]


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _check_inputs(*paths: Optional[str]) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise InputError(f"input not found: {p}")


def _check_output(path: Optional[str]) -> None:
    if path is not None and not Path(path).resolve().parent.is_dir():
        raise InputError(f"output directory does not exist: {Path(path).parent}")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _eval_config(args) -> EvalConfig:
    return EvalConfig(args.iou, args.tau_pred, args.strict_iou, args.strict_score)


def _load_pairs(args):
    _check_inputs(args.scenes, args.descriptions, args.predictions, args.labels)
    scenes, descriptions = load_dataset(args.scenes, args.descriptions, load_labels(args.labels))
    # predictions are checked against every description so a split filter does not orphan them
    predictions = load_predictions(args.predictions, descriptions) if args.predictions else {}
    if getattr(args, "split", None):
        descriptions = [d for d in descriptions if d.split == args.split]
    return scenes, descriptions, build_pairs(scenes, descriptions, predictions)


def cmd_eval(args) -> int:
    _check_output(args.out)
    _, descriptions, pairs = _load_pairs(args)
    report = evaluate(pairs, _eval_config(args), args.workers).to_json()
    if args.attributes:
        report["attributes"] = attribute_breakdown(pairs, {d.key: d.attributes for d in descriptions},
                                                   _eval_config(args))
    _emit(_dumps(report), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _check_output(args.out)
    _check_output(args.csv)
    _, _, pairs = _load_pairs(args)
    config = _eval_config(args)
    rows = threshold_sweep(pairs, args.grid, args.tau_eval, config, args.workers)
    doc = {"config": config.to_json(), "tau_eval": args.tau_eval, "rows": rows, "version": __version__}
    if args.csv:
        atomic_write_text(args.csv, sweep_csv(rows))
    _emit(_dumps(doc), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    _check_inputs(args.scenes, args.descriptions, args.predictions, args.labels)
    scenes, descriptions, diagnostics = validate_dataset(args.scenes, args.descriptions, load_labels(args.labels))
    if args.predictions and not diagnostics:
        try:
            load_predictions(args.predictions, descriptions)
        except DatasetError as exc:
            diagnostics = exc.diagnostics
    for d in diagnostics:
        print(f"error: {d}")
    print(f"{len(scenes)} scenes, {len(descriptions)} descriptions, {len(diagnostics)} diagnostics")
    return EXIT_VALIDATION if diagnostics else EXIT_OK


def cmd_stats(args) -> int:
    _check_inputs(args.scenes, args.descriptions, args.labels)
    _check_output(args.out)
    scenes, descriptions = load_dataset(args.scenes, args.descriptions, load_labels(args.labels))
    report = compute_stats(scenes, descriptions)
    doc = report.to_json()
    if args.check_published:
        problems = check_against_published(report)
        doc["published_check"] = {"ok": not problems, "mismatches": problems}
    _emit(_dumps(doc), args.out)
    if args.check_published and doc["published_check"]["mismatches"]:
        for p in doc["published_check"]["mismatches"]:
            print(f"mismatch: {p}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_baseline(args) -> int:
    _check_inputs(args.scenes, args.descriptions, args.labels, args.lexicon)
    _check_output(args.out)
    labels = load_labels(args.labels)
    scenes, descriptions = load_dataset(args.scenes, args.descriptions, labels)
    lexicon = load_lexicon(args.lexicon)
    missing = sorted(labels - set(lexicon))
    if missing:
        raise ValidationError(f"lexicon does not cover labels: {', '.join(missing)}", field="lexicon")
    preds = [lexical_baseline(d, scenes[d.scene_id], lexicon) for d in descriptions]
    if args.out:
        write_jsonl(preds, args.out)
    else:
        sys.stdout.write("".join(json.dumps(p.to_json()) + "\n" for p in preds))
    return EXIT_OK


def cmd_assign(args) -> int:
    _check_output(args.out)
    scenes, descriptions, pairs = _load_pairs(args)
    records = []
    for pair in pairs:
        proposals = [b for b, _ in pair.predictions]
        labels = assign_training_targets(proposals, list(pair.gt_boxes), args.strategy, args.tau_train)
        records.append({"scene_id": pair.scene_id, "ann_id": pair.ann_id, "strategy": labels.strategy.value,
                        "tau_train": labels.tau_train, "labels": list(labels.labels)})
    _emit("".join(json.dumps(r) + "\n" for r in records), args.out)
    return EXIT_OK


def _proposal_jobs(args):
    _check_inputs(args.ply, args.predictions)
    from .dataset import _collect, parse_prediction

    records, diagnostics = _collect(args.predictions, parse_prediction)
    if diagnostics:
        raise DatasetError(diagnostics)
    ply = Path(args.ply)
    jobs = []
    for rec in records:
        cloud_path = ply / f"{rec.scene_id}.ply" if ply.is_dir() else ply
        _check_inputs(str(cloud_path))
        for b, (box, _) in enumerate(rec.boxes):
            stem = f"{rec.scene_id}_{rec.ann_id}" if len(rec.boxes) == 1 else f"{rec.scene_id}_{rec.ann_id}_{b}"
            jobs.append((str(cloud_path), box, stem))
    return jobs


def _render_job(job):
    cloud_path, box, stem, config, out_dir = job
    from .ply import read_ply

    images = render_proposal(read_ply(cloud_path), box, config)
    paths = []
    for k, img in enumerate(images):
        path = Path(out_dir) / f"{stem}_view{k}.ppm"
        write_image(img, path)
        paths.append(str(path))
    return paths


def cmd_render(args) -> int:
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise InputError(f"output directory does not exist: {out_dir}")
    config = RenderConfig(args.views, args.elevation, args.distance, args.radius, args.size, args.fov, args.aim)
    jobs = [(c, b, s, config, str(out_dir)) for c, b, s in _proposal_jobs(args)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            written = list(pool.map(_render_job, jobs))
    else:
        written = [_render_job(j) for j in jobs]
    print(f"wrote {sum(len(w) for w in written)} images for {len(jobs)} proposals to {out_dir}")
    return EXIT_OK


def cmd_losses_selftest(args) -> int:
    records = gradient_selftest(args.batches, args.seed)
    worst = max(r["rel_error"] for r in records)
    print(f"batches={len(records)} max_rel_error={worst:.3e} tolerance={args.tolerance:.0e}")
    if worst >= args.tolerance:
        print("FAIL: analytic gradient disagrees with finite differences")
        return EXIT_INTERNAL
    print("OK")
    return EXIT_OK


def _add_dataset_args(p, predictions: bool = True, required_predictions: bool = False):
    p.add_argument("--scenes", required=True, help="scenes.jsonl")
    p.add_argument("--descriptions", required=True, help="descriptions.jsonl")
    if predictions:
        p.add_argument("--predictions", required=required_predictions, default=None,
                       help="predictions.jsonl; descriptions without a record get no boxes")
    p.add_argument("--labels", default=None, help="label vocabulary JSON (default: bundled nyu40)")


def _add_eval_args(p):
    p.add_argument("--iou", type=parse_floats, default=DEFAULT_IOU_THRESHOLDS,
                   help="comma-separated IoU thresholds for true positives")
    p.add_argument("--tau-pred", type=float, default=DEFAULT_PREDICTION_THRESHOLD,
                   help="keep predicted boxes whose score exceeds this")
    p.add_argument("--strict-iou", action=argparse.BooleanOptionalAction, default=True,
                   help="true positive needs IoU > threshold (else >=)")
    p.add_argument("--strict-score", action=argparse.BooleanOptionalAction, default=True,
                   help="keep scores > tau-pred (else >=)")
    p.add_argument("--split", choices=("train", "val", "test"), default=None,
                   help="evaluate only descriptions of this split (default: all)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="groundeval", description=__doc__, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"groundeval {__version__} ({kernels.backend()})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="F1 report per scenario", formatter_class=fmt)
    _add_dataset_args(p, required_predictions=True)
    _add_eval_args(p)
    p.add_argument("--attributes", action="store_true", help="add the single-attribute F1 breakdown")
    p.add_argument("--out", default=None, help="report JSON (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="F1 over a grid of prediction thresholds", formatter_class=fmt)
    _add_dataset_args(p, required_predictions=True)
    _add_eval_args(p)
    p.add_argument("--grid", type=parse_grid, default=parse_grid("0:1:0.05"),
                   help="prediction thresholds, start:stop:step or comma list")
    p.add_argument("--tau-eval", type=float, default=0.5, help="IoU threshold of the curves")
    p.add_argument("--csv", default=None, help="also write a plot-ready CSV here")
    p.add_argument("--out", default=None, help="sweep JSON (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check dataset (and prediction) files", formatter_class=fmt)
    _add_dataset_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="dataset statistics per split and scenario", formatter_class=fmt)
    _add_dataset_args(p, predictions=False)
    p.add_argument("--check-published", action="store_true",
                   help="compare against the published Multi3DRefer counts; exit 1 on mismatch")
    p.add_argument("--out", default=None, help="stats JSON (default: stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("baseline", help="lexical class-name baseline predictions", formatter_class=fmt)
    _add_dataset_args(p, predictions=False)
    p.add_argument("--lexicon", default=None, help="class -> synonyms JSON (default: bundled nyu40 lexicon)")
    p.add_argument("--out", default=None, help="predictions.jsonl (default: stdout)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("assign", help="training-target labels for predicted proposals", formatter_class=fmt)
    _add_dataset_args(p, required_predictions=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.HUNGARIAN.value,
                   help="positive-assignment strategy")
    p.add_argument("--tau-train", type=float, default=DEFAULT_TAU_TRAIN, help="IoU threshold for positives")
    p.add_argument("--out", default=None, help="labels JSONL (default: stdout)")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("render", help="multi-view PPM renders of each predicted box", formatter_class=fmt)
    p.add_argument("--ply", required=True, help="scene PLY file, or directory of {scene_id}.ply")
    p.add_argument("--predictions", required=True, help="predictions.jsonl with boxes to render")
    p.add_argument("--out-dir", required=True, help="directory for {scene_id}_{ann_id}_view{k}.ppm")
    p.add_argument("--views", type=int, default=3, help="cameras, evenly spaced in azimuth")
    p.add_argument("--elevation", type=float, default=45.0, help="camera elevation in degrees")
    p.add_argument("--distance", type=float, default=1.0, help="camera distance from the aim point (m)")
    p.add_argument("--radius", type=float, default=0.025, help="point splat radius (m)")
    p.add_argument("--size", type=int, default=224, help="square image size (px)")
    p.add_argument("--fov", type=float, default=60.0, help="vertical field of view (degrees)")
    p.add_argument("--aim", choices=("box_center", "centroid"), default="box_center", help="camera aim point")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("losses", help="loss utilities", formatter_class=fmt)
    lsub = p.add_subparsers(dest="losses_command", required=True)
    q = lsub.add_parser("selftest", help="analytic vs finite-difference contrastive gradients", formatter_class=fmt)
    q.add_argument("--batches", type=int, default=100, help="random batches")
    q.add_argument("--seed", type=int, default=0, help="random seed")
    q.add_argument("--tolerance", type=float, default=1e-4, help="max relative error")
    q.set_defaults(func=cmd_losses_selftest)

    p = sub.add_parser("synth", help="write a random synthetic dataset", formatter_class=fmt)
    p.add_argument("--out-dir", required=True, help="destination directory")
    p.add_argument("--scenes-count", type=int, default=4, help="number of scenes")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_synth)
    return parser


def cmd_synth(args) -> int:
    from .synthetic import write_synthetic

    out = Path(args.out_dir)
    if not out.is_dir():
        raise InputError(f"output directory does not exist: {out}")
    paths = write_synthetic(out, args.scenes_count, np.random.default_rng(args.seed))
    print("\n".join(str(p) for p in paths))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ValidationError) as exc:
        for d in getattr(exc, "diagnostics", [exc]):
            print(f"error: {d}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
