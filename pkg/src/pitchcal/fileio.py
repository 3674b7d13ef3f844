"""File formats: annotations, detector inputs, camera parameters, reports.

Annotation files hold normalized coordinates (divided by image width and
height); everything else is in pixels.  Unknown class names are skipped
with a warning rather than rejected outright, so batches survive odd
files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .camera import CameraParams, camera_from_dict, camera_to_dict
from .derive import SOURCE_DETECTOR, Annotation, Keypoint, KeypointSet, LineObservation
from .pitch import NUM_KEYPOINTS, PitchTemplate

DEFAULT_IMAGE_SIZE = (960, 540)


def read_annotation(
    path: str | Path,
    image_size: tuple[int, int] | None = None,
    template: PitchTemplate | None = None,
) -> tuple[Annotation, list[str]]:
    """Load an annotation file; returns the annotation and warning list.

    Coordinate scaling uses, in order of precedence: the explicit
    ``image_size`` argument, the file's embedded ``image_size`` field,
    or the 960x540 default.  Unknown class names are skipped with a
    warning; out-of-range coordinates are kept with a warning.
    """
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: annotation file must be a JSON object")

    warnings: list[str] = []
    embedded = data.pop("image_size", None)
    if image_size is None:
        image_size = tuple(embedded) if embedded else DEFAULT_IMAGE_SIZE
    w, h = int(image_size[0]), int(image_size[1])

    known = set(template.markings) if template is not None else None
    points: dict[str, np.ndarray] = {}
    for name, entries in data.items():
        if known is not None and name not in known:
            warnings.append(f"{path.name}: unknown class {name!r} skipped")
            continue
        pts = []
        for entry in entries:
            x, y = float(entry["x"]), float(entry["y"])
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ValueError(f"{path}: non-finite coordinate in {name!r}")
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                warnings.append(
                    f"{path.name}: {name!r} point ({x:.3f}, {y:.3f}) outside [0, 1], kept"
                )
            pts.append((x * w, y * h))
        if pts:
            points[name] = np.array(pts)
    return Annotation((w, h), points), warnings


def annotation_to_dict(annotation: Annotation) -> dict:
    w, h = annotation.image_size
    out: dict = {"image_size": [w, h]}
    for name in sorted(annotation.points):
        pts = annotation.points[name]
        out[name] = [{"x": float(p[0]) / w, "y": float(p[1]) / h} for p in pts]
    return out


def write_annotation(path: str | Path, annotation: Annotation) -> None:
    _write_json(path, annotation_to_dict(annotation))


def detections_to_dict(keypoints: KeypointSet, lines: list[LineObservation]) -> dict:
    return {
        "keypoints": [
            {
                "id": kp.id,
                "x": float(kp.position[0]),
                "y": float(kp.position[1]),
                "confidence": float(kp.confidence),
            }
            for kp in keypoints
        ],
        "lines": [
            {
                "class": obs.class_name,
                "x1": float(obs.p1[0]),
                "y1": float(obs.p1[1]),
                "x2": float(obs.p2[0]),
                "y2": float(obs.p2[1]),
                "confidence": float(obs.confidence),
            }
            for obs in lines
        ],
    }


def write_detections(path: str | Path, keypoints: KeypointSet, lines: list[LineObservation]) -> None:
    _write_json(path, detections_to_dict(keypoints, lines))


def read_detections(path: str | Path) -> tuple[KeypointSet, list[LineObservation]]:
    with open(path) as fh:
        data = json.load(fh)
    keypoints = KeypointSet()
    for entry in data.get("keypoints", []):
        kp_id = int(entry["id"])
        if not 0 <= kp_id < NUM_KEYPOINTS:
            raise ValueError(f"{path}: keypoint id {kp_id} out of range")
        keypoints.add(
            Keypoint(
                kp_id,
                (float(entry["x"]), float(entry["y"])),
                float(entry.get("confidence", 1.0)),
                SOURCE_DETECTOR,
            )
        )
    lines = [
        LineObservation(
            str(entry["class"]),
            (float(entry["x1"]), float(entry["y1"])),
            (float(entry["x2"]), float(entry["y2"])),
            float(entry.get("confidence", 1.0)),
        )
        for entry in data.get("lines", [])
    ]
    return keypoints, lines


def write_camera(path: str | Path, params: CameraParams, rmse_px: float | None = None) -> None:
    _write_json(path, camera_to_dict(params, rmse_px))


def read_camera(path: str | Path) -> CameraParams:
    with open(path) as fh:
        return camera_from_dict(json.load(fh))


def _write_json(path: str | Path, data: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
