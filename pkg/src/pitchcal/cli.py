"""Command-line interface and batch pipeline runner.

Subcommands: ``synth`` (generate oracle data), ``derive`` (annotations to
keypoints), ``calibrate`` (detections to cameras, optionally evaluated),
``evaluate`` (cameras against annotations) and ``tune`` (grid search of
voter confidence thresholds).  Per-frame failures never abort a batch;
they surface as error records and missing cameras.

Exit codes: 0 completed, 1 usage error, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .camera import is_plausible
from .derive import Annotation, KeypointSet, LineObservation, derive_keypoints
from .fileio import (
    DEFAULT_IMAGE_SIZE,
    annotation_to_dict,
    detections_to_dict,
    read_annotation,
    read_camera,
    read_detections,
    write_camera,
    _write_json,
)
from .metrics import DEFAULT_THRESHOLDS, EvalReport, l2_keypoints, project_markings
from .overlay import render_overlay
from .pitch import PitchTemplate
from .synth import SyntheticScenario, render_annotation, render_detections, sample_camera
from .voter import VoterConfig, calibrate_frame

MODES = ("derive", "calibrate", "evaluate", "synth", "tune")


@dataclass
class RunManifest:
    """Everything a batch run needs."""

    mode: str
    output_dir: Path
    input_dir: Path | None = None
    annotations_dir: Path | None = None
    cameras_dir: Path | None = None
    seed: int = 0
    jobs: int = 1
    frames: int = 20
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE
    template: PitchTemplate = field(default_factory=PitchTemplate)
    voter: VoterConfig = field(default_factory=VoterConfig)
    scenario: SyntheticScenario = field(default_factory=SyntheticScenario)
    write_overlays: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode in ("derive", "calibrate", "tune") and self.input_dir is None:
            raise ValueError(f"mode {self.mode!r} requires an input directory")
        if self.mode == "evaluate" and (self.input_dir is None or self.cameras_dir is None):
            raise ValueError("evaluate mode requires annotations (--input) and --cameras")
        if self.mode == "tune" and self.annotations_dir is None:
            raise ValueError("tune mode requires --annotations")


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def manifest_from_config(manifest: RunManifest, config: dict) -> RunManifest:
    """Apply config-file sections on top of a manifest."""
    updates: dict = {}
    if "template" in config:
        updates["template"] = PitchTemplate.from_dict(config["template"])
    if "voter" in config:
        voter_cfg = dict(config["voter"])
        if "confidence_thresholds" in voter_cfg:
            voter_cfg["confidence_thresholds"] = tuple(voter_cfg["confidence_thresholds"])
        updates["voter"] = replace(manifest.voter, **voter_cfg)
    if "scenario" in config:
        known = {f.name for f in fields(SyntheticScenario)}
        scenario_cfg = {
            k: tuple(v) if isinstance(v, list) else v for k, v in config["scenario"].items()
        }
        unknown = set(scenario_cfg) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        updates["scenario"] = replace(manifest.scenario, **scenario_cfg)
    if "image_size" in config:
        updates["image_size"] = tuple(config["image_size"])
    if "write_overlays" in config:
        updates["write_overlays"] = bool(config["write_overlays"])
    return replace(manifest, **updates) if updates else manifest


def _frame_files(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir() if p.suffix == ".json")
    if not files:
        raise FileNotFoundError(f"no .json files in {directory}")
    return files


def _run_synth(manifest: RunManifest) -> dict:
    out = manifest.output_dir
    scenario = manifest.scenario.with_seed(manifest.seed)
    template = manifest.template
    rngs = scenario.frame_rngs(manifest.frames)
    for i, rng in enumerate(rngs):
        name = f"frame_{i:04d}.json"
        params = sample_camera(scenario, rng, template)
        annotation = render_annotation(params, template, scenario, rng)
        keypoints, lines = render_detections(params, template, scenario, rng)
        _write_json(out / "annotations" / name, annotation_to_dict(annotation))
        _write_json(out / "detections" / name, detections_to_dict(keypoints, lines))
        write_camera(out / "cameras_gt" / name, params, 0.0)
    summary = {"mode": "synth", "frames": manifest.frames, "seed": manifest.seed}
    _write_json(out / "summary.json", summary)
    return summary


def _run_derive(manifest: RunManifest) -> dict:
    records = []
    for path in _frame_files(manifest.input_dir):
        record: dict = {"frame": path.name}
        try:
            annotation, warnings = read_annotation(
                path, template=manifest.template
            )
            keypoints = derive_keypoints(manifest.template, annotation)
            _write_json(
                manifest.output_dir / "keypoints" / path.name,
                detections_to_dict(keypoints, []),
            )
            record.update(status="ok", keypoints=len(keypoints), warnings=warnings)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            record.update(status="error", error=str(exc))
        records.append(record)
    summary = {
        "mode": "derive",
        "frames": len(records),
        "errors": sum(r["status"] == "error" for r in records),
        "records": records,
    }
    _write_json(manifest.output_dir / "summary.json", summary)
    return summary


def _calibrate_one(
    manifest: RunManifest, path: Path
) -> tuple[dict, object, Annotation | None, float | None]:
    """Worker for one frame; returns (record, outcome, annotation, l2)."""
    record: dict = {"frame": path.name}
    annotation = None
    l2 = None
    try:
        keypoints, lines = read_detections(path)
        outcome = calibrate_frame(
            manifest.template, keypoints, lines, manifest.voter, manifest.image_size
        )
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        record.update(status="error", error=str(exc))
        return record, None, None, None

    ann_path = (
        manifest.annotations_dir / path.name if manifest.annotations_dir is not None else None
    )
    if ann_path is not None and ann_path.exists():
        try:
            annotation, _ = read_annotation(ann_path, template=manifest.template)
            # Detector emulations keep template ids, so the ground truth
            # is derived without the left-right remap for the L2 metric.
            gt = derive_keypoints(manifest.template, annotation, remap=False)
            common = set(gt.ids) & set(keypoints.ids)
            l2 = l2_keypoints(gt, keypoints) if common else None
        except (ValueError, KeyError, json.JSONDecodeError):
            annotation = None

    if outcome is None:
        record.update(status="none")
    else:
        record.update(
            status="ok",
            subset=outcome.subset,
            rmse_px=outcome.rmse_px,
            used_points=len(outcome.used_ids),
        )
    return record, outcome, annotation, l2


def _run_calibrate(manifest: RunManifest) -> dict:
    paths = _frame_files(manifest.input_dir)
    if manifest.jobs > 1:
        with ThreadPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(lambda p: _calibrate_one(manifest, p), paths))
    else:
        results = [_calibrate_one(manifest, p) for p in paths]

    report = EvalReport(thresholds=manifest.thresholds)
    records = []
    evaluated = False
    for path, (record, outcome, annotation, l2) in zip(paths, results):
        if outcome is not None:
            write_camera(
                manifest.output_dir / "cameras" / path.name, outcome.params, outcome.rmse_px
            )
            if manifest.write_overlays:
                svg = render_overlay(
                    outcome.params, manifest.template, manifest.image_size
                )
                svg_path = manifest.output_dir / "overlays" / (path.stem + ".svg")
                svg_path.parent.mkdir(parents=True, exist_ok=True)
                svg_path.write_text(svg)
        if annotation is not None:
            evaluated = True
            predictions = (
                project_markings(outcome.params, manifest.template, manifest.image_size)
                if outcome is not None
                else None
            )
            report.add_frame(predictions, annotation, l2)
        records.append(record)

    summary = {
        "mode": "calibrate",
        "frames": len(records),
        "with_camera": sum(r["status"] == "ok" for r in records),
        "errors": sum(r["status"] == "error" for r in records),
        "records": records,
    }
    if evaluated:
        summary["report"] = report.to_dict()
        _write_json(manifest.output_dir / "report.json", report.to_dict())
    _write_json(manifest.output_dir / "summary.json", summary)
    return summary


def _run_evaluate(manifest: RunManifest) -> dict:
    report = EvalReport(thresholds=manifest.thresholds)
    for path in _frame_files(manifest.input_dir):
        annotation, _ = read_annotation(path, template=manifest.template)
        camera_path = manifest.cameras_dir / path.name
        predictions = None
        if camera_path.exists():
            params = read_camera(camera_path)
            if is_plausible(params, manifest.voter.bounds):
                predictions = project_markings(
                    params, manifest.template, annotation.image_size
                )
        report.add_frame(predictions, annotation)
    result = {"mode": "evaluate", **report.to_dict()}
    _write_json(manifest.output_dir / "report.json", result)
    return result


def _run_tune(manifest: RunManifest) -> dict:
    """Grid search of descending confidence-threshold triples by Score."""
    paths = _frame_files(manifest.input_dir)
    frames: list[tuple[KeypointSet, list[LineObservation], Annotation]] = []
    for path in paths:
        ann_path = manifest.annotations_dir / path.name
        if not ann_path.exists():
            continue
        keypoints, lines = read_detections(path)
        annotation, _ = read_annotation(ann_path, template=manifest.template)
        frames.append((keypoints, lines, annotation))
    if not frames:
        raise FileNotFoundError("no detection/annotation pairs to tune on")

    grid = [0.9, 0.7, 0.5, 0.3, 0.1]
    best: dict | None = None
    for triple in itertools.combinations(grid, 3):
        voter = replace(manifest.voter, confidence_thresholds=triple)
        report = EvalReport(thresholds=manifest.thresholds)
        for keypoints, lines, annotation in frames:
            outcome = calibrate_frame(
                manifest.template, keypoints, lines, voter, manifest.image_size
            )
            predictions = (
                project_markings(outcome.params, manifest.template, manifest.image_size)
                if outcome is not None
                else None
            )
            report.add_frame(predictions, annotation)
        entry = {"confidence_thresholds": list(triple), "score": report.score}
        if best is None or entry["score"] > best["score"]:
            best = entry
    result = {"mode": "tune", "frames": len(frames), **best}
    _write_json(manifest.output_dir / "best_config.json", result)
    return result


_RUNNERS = {
    "synth": _run_synth,
    "derive": _run_derive,
    "calibrate": _run_calibrate,
    "evaluate": _run_evaluate,
    "tune": _run_tune,
}


def run_batch(manifest: RunManifest) -> dict:
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[manifest.mode](manifest)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pitchcal", description="Pitch-keypoint camera calibration pipeline")
    sub = parser.add_subparsers(dest="mode", required=True)

    def common(p: argparse.ArgumentParser, needs_input: bool) -> None:
        if needs_input:
            p.add_argument("--input", required=True, help="input directory")
        p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument(
            "--threshold",
            type=float,
            nargs="+",
            default=list(DEFAULT_THRESHOLDS),
            help="evaluation distance thresholds (px); the first is the working one",
        )

    p = sub.add_parser("synth", help="generate synthetic annotations and detections")
    common(p, needs_input=False)
    p.add_argument("--frames", type=int, default=20)

    p = sub.add_parser("derive", help="derive keypoints from annotations")
    common(p, needs_input=True)

    p = sub.add_parser("calibrate", help="calibrate cameras from detection files")
    common(p, needs_input=True)
    p.add_argument("--annotations", default=None, help="annotation directory for evaluation")

    p = sub.add_parser("evaluate", help="evaluate camera files against annotations")
    common(p, needs_input=True)
    p.add_argument("--cameras", required=True, help="directory of camera JSON files")

    p = sub.add_parser("tune", help="grid-search voter confidence thresholds")
    common(p, needs_input=True)
    p.add_argument("--annotations", required=True, help="annotation directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = load_config(args.config)
        manifest = RunManifest(
            mode=args.mode,
            output_dir=Path(args.output),
            input_dir=Path(args.input) if getattr(args, "input", None) else None,
            annotations_dir=(
                Path(args.annotations) if getattr(args, "annotations", None) else None
            ),
            cameras_dir=Path(args.cameras) if getattr(args, "cameras", None) else None,
            seed=args.seed,
            jobs=args.jobs,
            frames=getattr(args, "frames", 20),
            thresholds=tuple(args.threshold),
        )
        manifest = manifest_from_config(manifest, config)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2

    try:
        summary = run_batch(manifest)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2

    printable = {k: v for k, v in summary.items() if k not in ("records",)}
    print(json.dumps(printable, indent=1, default=str))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
