"""Polyline-matching evaluation: Acc@t, completeness ratio, Score and L2.

A predicted class is rendered by projecting densely sampled template
markings and splitting the result at frame exits and behind-camera
transitions.  A ground-truth class counts as a true positive at
threshold t iff every annotated point lies within t pixels of the
predicted polylines of that class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraParams, project_points
from .derive import Annotation, KeypointSet
from .pitch import PitchTemplate, sample_marking

DEFAULT_THRESHOLDS = (5.0, 10.0, 20.0)
DEFAULT_SAMPLE_STEP_M = 0.25


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, other: "ConfusionCounts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn


def _clip_to_border(inside: np.ndarray, outside: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Point where the segment inside->outside first crosses the border."""
    w, h = float(size[0]), float(size[1])
    d = outside - inside
    best_t = 1.0
    for axis, axis_hi in ((0, w), (1, h)):
        if abs(d[axis]) < 1e-12:
            continue
        other_hi = h if axis == 0 else w
        for bound in (0.0, axis_hi):
            t = (bound - inside[axis]) / d[axis]
            if 1e-12 < t <= best_t:
                q_other = inside[1 - axis] + t * d[1 - axis]
                if -1e-9 <= q_other <= other_hi + 1e-9:
                    best_t = t
    return inside + best_t * d


def clip_projected_polyline(
    uv: np.ndarray, in_front: np.ndarray, image_size: tuple[int, int]
) -> list[np.ndarray]:
    """Split a projected polyline into in-frame runs.

    Behind-camera transitions split hard; frame exits and entries insert
    the exact border crossing point so runs reach the frame boundary.
    Only runs with at least 2 points are returned.
    """
    w, h = image_size
    in_frame = (
        in_front
        & (uv[:, 0] >= 0.0)
        & (uv[:, 0] <= w)
        & (uv[:, 1] >= 0.0)
        & (uv[:, 1] <= h)
    )
    runs: list[np.ndarray] = []
    current: list[np.ndarray] = []

    def flush() -> None:
        if len(current) >= 2:
            runs.append(np.array(current))
        current.clear()

    for i, point in enumerate(uv):
        if in_frame[i]:
            if not current and i > 0 and in_front[i - 1] and not in_frame[i - 1]:
                current.append(_clip_to_border(point, uv[i - 1], image_size))
            current.append(point)
        else:
            if current:
                if in_front[i]:
                    current.append(_clip_to_border(current[-1], point, image_size))
                flush()
    flush()
    return runs


def project_markings(
    params: CameraParams,
    template: PitchTemplate,
    image_size: tuple[int, int],
    sample_step_m: float = DEFAULT_SAMPLE_STEP_M,
) -> dict[str, list[np.ndarray]]:
    """Predicted polylines per marking class under the given camera.

    A class is predicted iff it has at least one surviving in-frame run
    of 2+ points.
    """
    predictions: dict[str, list[np.ndarray]] = {}
    for name, marking in template.markings.items():
        world = sample_marking(template, marking, sample_step_m)
        uv, in_front = project_points(params, world)
        runs = clip_projected_polyline(uv, in_front, image_size)
        if runs:
            predictions[name] = runs
    return predictions


def point_to_polyline_distance(point: np.ndarray, polyline: np.ndarray) -> float:
    """Minimum distance from a point to the segments of a polyline."""
    p = np.asarray(point, dtype=float)
    a = polyline[:-1]
    b = polyline[1:]
    ab = b - a
    denom = np.sum(ab * ab, axis=1)
    t = np.zeros(len(a))
    nz = denom > 1e-18
    t[nz] = np.clip(np.sum((p - a[nz]) * ab[nz], axis=1) / denom[nz], 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(closest - p, axis=1)))


def distance_to_class(point: np.ndarray, runs: list[np.ndarray]) -> float:
    return min(point_to_polyline_distance(point, run) for run in runs)


def _worst_class_distances(
    predictions: dict[str, list[np.ndarray]], annotation: Annotation
) -> dict[str, float]:
    """Largest annotation-point distance per class.

    +inf marks a predicted-but-unannotated class, -inf an annotated-but-
    unpredicted one, so thresholding yields the confusion outcome.
    """
    out: dict[str, float] = {}
    for name in set(annotation.points) | set(predictions):
        if name in annotation.points and name in predictions:
            out[name] = max(
                distance_to_class(p, predictions[name]) for p in annotation.points[name]
            )
        elif name in predictions:
            out[name] = float("inf")
        else:
            out[name] = float("-inf")
    return out


def _confusion_from_distance(worst: float, threshold_px: float) -> ConfusionCounts:
    if worst == float("-inf"):
        return ConfusionCounts(fn=1)
    if worst <= threshold_px:
        return ConfusionCounts(tp=1)
    return ConfusionCounts(fp=1)


def segment_confusion(
    predictions: dict[str, list[np.ndarray]],
    annotation: Annotation,
    threshold_px: float,
) -> dict[str, ConfusionCounts]:
    """Per-class TP/FP/FN at a pixel threshold (closed comparison)."""
    if threshold_px <= 0:
        raise ValueError("threshold must be positive")
    return {
        name: _confusion_from_distance(worst, threshold_px)
        for name, worst in _worst_class_distances(predictions, annotation).items()
    }


def acc_at_t(counts: ConfusionCounts) -> float | None:
    """TP / (TP + FN + FP); None when all counts are zero."""
    if counts.total == 0:
        return None
    return counts.tp / counts.total


def score(acc: float, completeness_ratio: float) -> float:
    """Combined metric: accuracy at the working threshold times the
    fraction of frames with camera output."""
    if not (0.0 <= acc <= 1.0 and 0.0 <= completeness_ratio <= 1.0):
        raise ValueError("score inputs must be in [0, 1]")
    return acc * completeness_ratio


def l2_keypoints(gt: KeypointSet, pred: KeypointSet) -> float:
    """Mean Euclidean distance over keypoint ids present in both sets."""
    common = sorted(set(gt.ids) & set(pred.ids))
    if not common:
        raise ValueError("no common keypoint ids")
    dists = [np.linalg.norm(gt.get(i).position - pred.get(i).position) for i in common]
    return float(np.mean(dists))


@dataclass
class EvalReport:
    """Aggregate evaluation over a batch of frames."""

    frames: int = 0
    frames_with_camera: int = 0
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    counts: dict[float, ConfusionCounts] = field(default_factory=dict)
    per_class: dict[str, ConfusionCounts] = field(default_factory=dict)
    l2_sum: float = 0.0
    l2_frames: int = 0

    def __post_init__(self) -> None:
        for t in self.thresholds:
            self.counts.setdefault(t, ConfusionCounts())

    def add_frame(
        self,
        predictions: dict[str, list[np.ndarray]] | None,
        annotation: Annotation,
        l2_px: float | None = None,
    ) -> None:
        """Record one evaluated frame.

        ``predictions`` is None when no plausible camera was produced;
        such frames only lower the completeness ratio.
        """
        self.frames += 1
        if predictions is None:
            return
        self.frames_with_camera += 1
        worst = _worst_class_distances(predictions, annotation)
        for t in self.thresholds:
            for name, dist in worst.items():
                c = _confusion_from_distance(dist, t)
                self.counts[t].add(c)
                if t == self.working_threshold:
                    self.per_class.setdefault(name, ConfusionCounts()).add(c)
        if l2_px is not None:
            self.l2_sum += l2_px
            self.l2_frames += 1

    @property
    def working_threshold(self) -> float:
        return self.thresholds[0]

    @property
    def completeness_ratio(self) -> float:
        return self.frames_with_camera / self.frames if self.frames else 0.0

    def acc(self, threshold: float | None = None) -> float | None:
        t = self.working_threshold if threshold is None else threshold
        return acc_at_t(self.counts[t])

    @property
    def score(self) -> float:
        acc = self.acc()
        if acc is None:
            return 0.0
        return score(acc, self.completeness_ratio)

    @property
    def l2_px(self) -> float | None:
        return self.l2_sum / self.l2_frames if self.l2_frames else None

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "frames_with_camera": self.frames_with_camera,
            "completeness_ratio": self.completeness_ratio,
            "acc": {str(t): self.acc(t) for t in self.thresholds},
            "score": self.score,
            "l2_px": self.l2_px,
            "counts": {
                str(t): {"tp": c.tp, "fp": c.fp, "fn": c.fn} for t, c in self.counts.items()
            },
            "per_class": {
                name: {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for name, c in sorted(self.per_class.items())
            },
        }
