"""Command-line entry point: synth, train, calibrate, detect, eval, sweep.

Each subcommand reads an optional JSON run config (`--config`); flags override file
values. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.classifier.labels import (
    CARD_COLORS,
    EVENT_CLASSES,
    TEN_CLASSES,
    ClassLabel,
    PoolLabel,
    card_label,
    merge_card_labels,
)
from app.classifier.schemas import ClassifierConfig
from app.classifier.service import (
    classify,
    load_classifier,
    read_predictions_csv,
    save_classifier,
    train_classifier,
    write_predictions_csv,
)
from app.core.logging import setup_logging
from app.core.metrics import write_metrics_textfile
from app.core.settings import get_settings
from app.domain.exceptions import ConfigValidationError, DatasetError, SoccerDetectionError
from app.evaluation.confusion import confusion_matrix
from app.evaluation.reports import (
    class_report,
    detection_precision,
    format_class_report,
    format_confusion_table,
    format_detection_table,
    format_known_unknown,
    format_sweep_table,
    known_unknown_report,
    write_class_report_csv,
    write_confusion_csv,
    write_detection_csv,
    write_known_unknown_csv,
    write_sweep_csv,
)
from app.evaluation.sweep import DEFAULT_THRESHOLDS, score_images, threshold_sweep
from app.finegrain.model import FinegrainConfig
from app.finegrain.service import (
    compare_card_accuracy,
    load_finegrain,
    save_finegrain,
    train_finegrain,
)
from app.nn.data import to_batch
from app.nn.training import TrainingConfig, write_curve_csv
from app.pipeline.cascade import CascadeModels
from app.pipeline.schemas import PipelineConfig
from app.pipeline.service import detect_directory, read_event_log, write_event_log, write_trace
from app.synth.manifest import DatasetManifest, load, read_manifest
from app.synth.schemas import PlantedEvent, SynthSpec
from app.synth.service import (
    GROUND_TRUTH,
    MIN_PLANT_GAP,
    generate,
    open_dataset,
    plant_match,
    read_ground_truth,
)
from app.vae.schemas import VaeConfig
from app.vae.service import (
    calibrate_threshold,
    image_losses,
    load_vae,
    save_vae,
    train_vae,
    with_threshold,
    write_loss_histogram,
)

logger = logging.getLogger("app.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Sub-seed keys; the synth generator owns its own keys below these.
_COMPONENT_KEYS = {"vae": 101, "classifier": 102, "classifier_flat": 103, "finegrain": 104}
_DEFAULT_PLAN = (
    ClassLabel.CORNER_KICK,
    ClassLabel.YELLOW_CARD,
    ClassLabel.FREE_KICK,
    ClassLabel.RED_CARD,
    ClassLabel.PENALTY_KICK,
)


class UsageError(Exception):
    """Flags parse but do not describe a runnable command."""


class RunConfig(BaseModel):
    """One experiment record; every section is validated before any work starts."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    synth: SynthSpec = Field(default_factory=SynthSpec)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    vae: VaeConfig = Field(default_factory=VaeConfig)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    finegrain: FinegrainConfig = Field(default_factory=FinegrainConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict):
            current = out.get(key)
            merged = _merge(current if isinstance(current, dict) else {}, value)
            if merged or key in out:
                out[key] = merged
        elif value is not None:
            out[key] = value
    return out


def _read_json(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigValidationError(f"config {path} must hold a JSON object")
    return data


def _validated(model: type[BaseModel], data: dict[str, Any]) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigValidationError(f"invalid {model.__name__}: {exc}") from exc


def load_run_config(path: str | None, overrides: dict[str, Any]) -> RunConfig:
    """Settings defaults, then the config file, then flags."""
    settings = get_settings()
    data: dict[str, Any] = {"seed": settings.seed, "training": {"dtype": settings.train_dtype}}
    if path:
        data = _merge(data, _read_json(path))
    return _validated(RunConfig, _merge(data, overrides))


def _pipeline_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "fps": args.fps,
        "window": args.window,
        "majority": args.majority,
        "dedup_window_s": args.dedup_seconds,
        "softmax_tau": args.softmax_tau,
        "vae_threshold": args.vae_threshold,
    }


def _training_for(run: RunConfig, component: str) -> TrainingConfig:
    seed = derive_seed(run.seed, _COMPONENT_KEYS[component])
    return run.training.model_copy(update={"seed": seed})


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _data_root(args: argparse.Namespace) -> Path:
    return Path(args.data or get_settings().data_dir)


# synth


def _plant(value: str) -> PlantedEvent:
    kind, _, frame = value.partition("@")
    try:
        return PlantedEvent(kind=ClassLabel(kind), frame_index=int(frame))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected Kind@frame, got {value!r}") from exc


def default_plan(length: int) -> list[PlantedEvent]:
    """Five events spread evenly over the match."""
    n = len(_DEFAULT_PLAN)
    if length < (n + 1) * MIN_PLANT_GAP:
        raise ConfigValidationError(
            f"a {length}-frame match is too short for the default plan; plant events explicitly"
        )
    return [
        PlantedEvent(kind=kind, frame_index=round(length * (i + 1) / (n + 1)))
        for i, kind in enumerate(_DEFAULT_PLAN)
    ]


def cmd_synth(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {"seed": args.seed, "synth": {"image_size": args.image_size}}
    if args.counts:
        train, val, test = args.counts
        overrides["synth"]["class_counts"] = {"train": train, "val": val, "test": test}
    if args.pool_counts:
        train, val, test = args.pool_counts
        overrides["synth"]["pool_counts"] = {"train": train, "val": val, "test": test}
    run = load_run_config(args.config, overrides)
    spec = run.synth.model_copy(update={"seed": run.seed})

    out = Path(args.out)
    manifest = generate(spec, out, workers=args.workers)
    _out(f"wrote {len(manifest.entries)} images to {out}")
    if args.match_length is not None:
        plan = args.plant or default_plan(args.match_length)
        match = plant_match(
            spec, plan, args.match_length, out / "match", fps=run.pipeline.fps
        )
        _out(
            f"wrote {match.length}-frame match with {len(match.ground_truth)} planted events "
            f"to {match.frames_dir}"
        )
    return EXIT_OK


# train


def cmd_train(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {
        "seed": args.seed,
        "training": {"epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr},
        "classifier": {"label_space": args.label_space},
    }
    run = load_run_config(args.config, overrides)
    manifest, _ = open_dataset(_data_root(args))
    out = Path(args.out)
    curve_path = Path(args.curve) if args.curve else out.with_suffix(".csv")

    if args.component == "vae":
        train = list(load(manifest, "train", labels=EVENT_CLASSES))
        val = list(load(manifest, "val", labels=EVENT_CLASSES))
        vae = train_vae(train, val, config=run.vae, training=_training_for(run, "vae"))
        save_vae(vae.model, out)
        curve = vae.curve
    elif args.component == "classifier":
        key = "classifier" if run.classifier.label_space == "nine" else "classifier_flat"
        train = list(load(manifest, "train", labels=TEN_CLASSES))
        val = list(load(manifest, "val", labels=TEN_CLASSES))
        clf = train_classifier(
            train, val, config=run.classifier, training=_training_for(run, key)
        )
        save_classifier(clf.model, out)
        curve = clf.curve
    else:
        cards = [card_label(c) for c in CARD_COLORS]
        train = list(load(manifest, "train", labels=cards))
        val = list(load(manifest, "val", labels=cards))
        fg = train_finegrain(
            train, val, config=run.finegrain, training=_training_for(run, "finegrain")
        )
        save_finegrain(fg.model, out)
        curve = fg.curve

    write_curve_csv(curve_path, curve)
    _out(f"trained {args.component} for {len(curve)} epochs: {out} (curve {curve_path})")
    return EXIT_OK


# calibrate


def cmd_calibrate(args: argparse.Namespace) -> int:
    run = load_run_config(args.config, {"pipeline": _pipeline_overrides(args)})
    manifest, _ = open_dataset(_data_root(args))
    vae = load_vae(args.vae)
    classifier = load_classifier(args.classifier)
    report_dir = Path(args.report_dir)

    ins = list(load(manifest, args.split, labels=EVENT_CLASSES))
    outs = list(load(manifest, args.split, labels=[PoolLabel.NON_SOCCER]))
    size = vae.config.input_size
    in_losses = image_losses(vae, to_batch([i.image for i in ins], size))
    out_losses = image_losses(vae, to_batch([i.image for i in outs], size))
    calibration = calibrate_threshold(in_losses, out_losses)
    write_loss_histogram(
        report_dir / "vae_loss_histogram.csv",
        in_losses,
        out_losses,
        threshold=calibration.threshold,
    )

    items = list(load(manifest, args.split))
    scored = score_images(items, classifier, vae=vae, vae_threshold=calibration.threshold)
    sweep = threshold_sweep(scored, args.thresholds or DEFAULT_THRESHOLDS)
    write_sweep_csv(report_dir / "sweep.csv", sweep)

    pipeline = _validated(
        PipelineConfig,
        {
            **run.pipeline.model_dump(),
            "vae_threshold": calibration.threshold,
            "softmax_tau": sweep.best_threshold,
        },
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(pipeline.model_dump_json(indent=2) + "\n", encoding="utf-8")
    if args.vae_out:
        save_vae(with_threshold(vae, calibration.threshold), args.vae_out)

    _out(format_sweep_table(sweep))
    _out(
        f"vae threshold {calibration.threshold:.4f} "
        f"(balanced accuracy {calibration.balanced_accuracy:.4f}); "
        f"softmax tau {sweep.best_threshold:.4f}; pipeline config {out}"
    )
    return EXIT_OK


# detect


def cmd_detect(args: argparse.Namespace) -> int:
    run = load_run_config(args.config, {})
    pipeline_data = run.pipeline.model_dump()
    if args.pipeline:
        pipeline_data = _merge(pipeline_data, _read_json(args.pipeline))
    pipeline = _validated(PipelineConfig, _merge(pipeline_data, _pipeline_overrides(args)))

    models = CascadeModels(
        vae=load_vae(args.vae),
        classifier=load_classifier(args.classifier),
        finegrain=load_finegrain(args.finegrain),
    )
    result = detect_directory(args.frames, models, pipeline, workers=args.workers)
    out = Path(args.out)
    write_event_log(out / "events.jsonl", result.occurrences)
    write_trace(out / "trace.jsonl", result)

    counts = result.counts()
    for kind in ClassLabel:
        if kind in EVENT_CLASSES:
            _out(f"{kind}\t{counts.get(kind, 0)}")
    _out(f"{len(result.occurrences)} events in {len(result.trace)} frames; log {out}")
    return EXIT_OK


# eval


def _truth_name(label: ClassLabel | PoolLabel, classes: Sequence[str]) -> str:
    if isinstance(label, ClassLabel) and "Card" in classes:
        return str(merge_card_labels(label))
    return str(label)


def _eval_predictions(args: argparse.Namespace, out: Path | None) -> None:
    classes, records = read_predictions_csv(args.predictions)
    manifest: DatasetManifest = read_manifest(args.data)
    labels = {entry.path: entry.label for entry in manifest.entries}
    truth: list[str] = []
    for record in records:
        if record.frame_id not in labels:
            raise DatasetError(f"{record.frame_id} is not in the dataset manifest", args.data)
        truth.append(_truth_name(labels[record.frame_id], classes))

    report = class_report(truth, [r.decision for r in records], classes)
    pairs = [
        (classes.index(t), r.top_index())
        for t, r in zip(truth, records, strict=True)
        if t in classes
    ]
    matrix = confusion_matrix([t for t, _ in pairs], [p for _, p in pairs], len(classes))
    _out(format_class_report(report))
    _out(format_confusion_table(matrix, classes))
    if out is not None:
        write_class_report_csv(out / "class_report.csv", report)
        write_confusion_csv(out / "confusion.csv", matrix, classes)


def _eval_detections(args: argparse.Namespace, out: Path | None) -> None:
    rows = detection_precision(
        read_event_log(args.events), read_ground_truth(args.ground_truth), args.tolerance
    )
    _out(format_detection_table(rows))
    if out is not None:
        write_detection_csv(out / "detection_precision.csv", rows)


def _eval_cards(args: argparse.Namespace) -> None:
    manifest, _ = open_dataset(_data_root(args))
    cards = list(load(manifest, args.split, labels=[card_label(c) for c in CARD_COLORS]))
    comparison = compare_card_accuracy(
        cards,
        merged=load_classifier(args.classifier),
        finegrain=load_finegrain(args.finegrain),
        flat=load_classifier(args.flat),
    )
    _out(
        f"card accuracy over {comparison.count} images: "
        f"cascade {comparison.cascade_accuracy:.4f}, flat {comparison.flat_accuracy:.4f}"
    )


def cmd_eval(args: argparse.Namespace) -> int:
    out = Path(args.out) if args.out else None
    ran = False
    if args.predictions:
        if not args.data:
            raise UsageError("--predictions needs --data")
        _eval_predictions(args, out)
        ran = True
    if args.events:
        if not args.ground_truth:
            raise UsageError("--events needs --ground-truth")
        _eval_detections(args, out)
        ran = True
    if args.flat:
        if not (args.data and args.classifier and args.finegrain):
            raise UsageError("--flat needs --data, --classifier and --finegrain")
        _eval_cards(args)
        ran = True
    if not ran:
        raise UsageError("eval needs --predictions, --events or --flat")
    return EXIT_OK


# sweep


def cmd_sweep(args: argparse.Namespace) -> int:
    manifest, _ = open_dataset(_data_root(args))
    classifier = load_classifier(args.classifier)
    vae = load_vae(args.vae) if args.vae else None
    items = list(load(manifest, args.split))
    scored = score_images(items, classifier, vae=vae, vae_threshold=args.vae_threshold)
    sweep = threshold_sweep(scored, args.thresholds or DEFAULT_THRESHOLDS)
    tau = sweep.best_threshold if args.tau is None else args.tau
    known = known_unknown_report(scored, tau)

    out = Path(args.out)
    write_sweep_csv(out / "sweep.csv", sweep)
    write_known_unknown_csv(out / "known_unknown.csv", known)
    outputs = classify([item.image for item in items], classifier)
    write_predictions_csv(
        out / "predictions.csv",
        [item.path for item in items],
        outputs,
        tau=tau,
        classes=[str(c) for c in classifier.config.classes],
    )
    _out(format_sweep_table(sweep))
    _out(format_known_unknown(known))
    return EXIT_OK


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags override its values")
    p.add_argument("--seed", type=int, help="global seed; every component derives sub-seeds")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fps", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--majority", type=int)
    p.add_argument("--dedup-seconds", type=float)
    p.add_argument("--softmax-tau", type=float)
    p.add_argument("--vae-threshold", type=float)


def _split(p: argparse.ArgumentParser, default: str) -> None:
    p.add_argument("--split", choices=("train", "val", "test"), default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soccer-events", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic dataset (and optionally a match)")
    _add_config(p)
    p.add_argument("--out", required=True, help="dataset root")
    p.add_argument("--image-size", type=int)
    p.add_argument("--counts", type=int, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--pool-counts", type=int, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--match-length", type=int, help="also write a planted match of N frames")
    p.add_argument("--plant", type=_plant, action="append", metavar="KIND@FRAME")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", help="train one component")
    _add_config(p)
    p.add_argument("component", choices=("vae", "classifier", "finegrain"))
    p.add_argument("--data", help="dataset root (default: SOCCER_DATA_DIR)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--curve", help="per-epoch CSV (default: next to the checkpoint)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--label-space", choices=("nine", "ten"))
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("calibrate", help="choose the VAE threshold and softmax tau")
    _add_config(p)
    _add_pipeline_flags(p)
    p.add_argument("--data", help="dataset root (default: SOCCER_DATA_DIR)")
    p.add_argument("--vae", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--out", required=True, help="pipeline config JSON to write")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--vae-out", help="also save the VAE with its threshold")
    p.add_argument("--thresholds", type=float, nargs="+")
    _split(p, "val")
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("detect", help="run the cascade over a frame directory")
    _add_config(p)
    _add_pipeline_flags(p)
    p.add_argument("--frames", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--finegrain", required=True)
    p.add_argument("--pipeline", help="pipeline config JSON written by calibrate")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("eval", help="metric reports for predictions, event logs or cards")
    _add_config(p)
    p.add_argument("--predictions", help="predictions CSV written by sweep")
    p.add_argument("--data")
    p.add_argument("--events", help="event log written by detect")
    p.add_argument("--ground-truth", help=f"{GROUND_TRUTH} written by synth")
    p.add_argument("--tolerance", type=int, default=15)
    p.add_argument("--classifier", help="merged 9-class checkpoint (card comparison)")
    p.add_argument("--finegrain")
    p.add_argument("--flat", help="flat 10-class checkpoint (card comparison)")
    p.add_argument("--out")
    _split(p, "test")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="softmax threshold sweep and known/unknown report")
    _add_config(p)
    p.add_argument("--data", help="dataset root (default: SOCCER_DATA_DIR)")
    p.add_argument("--classifier", required=True)
    p.add_argument("--vae")
    p.add_argument("--vae-threshold", type=float)
    p.add_argument("--thresholds", type=float, nargs="+")
    p.add_argument("--tau", type=float, help="operating point for the known/unknown report")
    p.add_argument("--out", required=True)
    _split(p, "test")
    p.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging("DEBUG" if get_settings().is_development else None)
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        code = args.handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_USAGE
    except SoccerDetectionError as exc:
        logger.error(
            exc.message,
            extra={"component": args.command, "success": False},
        )
        sys.stderr.write(f"error: {exc.message}\n")
        return EXIT_FAILURE
    finally:
        metrics_path = get_settings().metrics_textfile
        if metrics_path:
            write_metrics_textfile(metrics_path)
    logger.info(
        "command finished",
        extra={
            "component": args.command,
            "success": True,
            "duration_ms": int((time.perf_counter() - started) * 1000),
        },
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
