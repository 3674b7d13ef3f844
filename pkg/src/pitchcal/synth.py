"""Synthetic ground-truth generator.

Samples plausible broadcast camera poses and renders noiseless or noisy
annotations and detector-style outputs from the pitch template.  Serves
as the oracle for round-trip and robustness testing: with zero noise the
full pipeline must reproduce the sampled camera exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraParams, is_plausible, project_points, rotation_looking_at
from .derive import (
    SOURCE_DETECTOR,
    Annotation,
    Keypoint,
    KeypointSet,
    LineObservation,
)
from .metrics import clip_projected_polyline
from .pitch import PitchTemplate, sample_marking

LINE_SAMPLE_STEP_M = 1.0
CONIC_SAMPLES = 36


@dataclass(frozen=True)
class SyntheticScenario:
    """Camera sampling ranges and corruption settings.

    Position ranges approximate elevated broadcast positions on either
    side of the pitch; all ranges stay inside the camera plausibility
    bounds.  The generator resamples until the frame shows enough
    well-spread keypoints to be calibratable, so zero-noise batches close
    the loop with full completeness.
    """

    x_range: tuple[float, float] = (-60.0, 60.0)
    y_band: tuple[float, float] = (25.0, 55.0)  # sampled on either side
    z_range: tuple[float, float] = (8.0, 40.0)
    focal_range: tuple[float, float] = (800.0, 6000.0)
    image_size: tuple[int, int] = (960, 540)
    look_at_jitter_m: float = 3.0
    noise_sigma_px: float = 0.0
    dropout_prob: float = 0.0  # whole annotation classes
    keypoint_dropout_prob: float = 0.0  # individual detector keypoints
    outlier_prob: float = 0.0
    outlier_magnitude_px: float = 60.0
    confidence_range: tuple[float, float] = (1.0, 1.0)
    min_visible_keypoints: int = 8
    min_ground_keypoints: int = 6
    min_tilt_deg: float = 20.0  # optical axis angle away from straight down
    seed: int = 0

    def __post_init__(self) -> None:
        for prob in (self.dropout_prob, self.keypoint_dropout_prob, self.outlier_prob):
            if not 0.0 <= prob <= 1.0:
                raise ValueError("probabilities must be in [0, 1]")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def frame_rngs(self, count: int) -> list[np.random.Generator]:
        """Independent per-frame generators; stable under parallelism."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(count)]

    def with_seed(self, seed: int) -> "SyntheticScenario":
        return replace(self, seed=seed)


def _visible_keypoint_ids(
    params: CameraParams, template: PitchTemplate
) -> tuple[np.ndarray, np.ndarray]:
    worlds = template.keypoint_world_array()
    uv, in_front = project_points(params, worlds)
    w, h = params.image_size
    visible = (
        in_front
        & (uv[:, 0] >= 0.0)
        & (uv[:, 0] <= w)
        & (uv[:, 1] >= 0.0)
        & (uv[:, 1] <= h)
    )
    return np.where(visible)[0], uv


def sample_camera(
    scenario: SyntheticScenario,
    rng: np.random.Generator,
    template: PitchTemplate | None = None,
    max_attempts: int = 2000,
) -> CameraParams:
    """Draw a plausible camera whose frame is calibratable.

    Rejects views that are too close to straight-down (the single-plane
    focal recovery degenerates) or that show too few or too collinear
    ground keypoints.
    """
    template = template or PitchTemplate()
    hl, hw = template.length / 2, template.width / 2
    ground_worlds = template.keypoint_world_array()

    for _ in range(max_attempts):
        side = 1.0 if rng.random() < 0.5 else -1.0
        position = np.array(
            [
                rng.uniform(*scenario.x_range),
                side * rng.uniform(*scenario.y_band),
                rng.uniform(*scenario.z_range),
            ]
        )
        target = np.array(
            [
                rng.uniform(-hl, hl) + rng.normal(0.0, scenario.look_at_jitter_m),
                rng.uniform(-hw, hw) + rng.normal(0.0, scenario.look_at_jitter_m),
                0.0,
            ]
        )
        focal = rng.uniform(*scenario.focal_range)
        try:
            rotation = rotation_looking_at(position, target)
        except ValueError:
            continue
        if -rotation[2, 2] > math.cos(math.radians(scenario.min_tilt_deg)):
            continue  # looking almost straight down
        params = CameraParams(focal, rotation, position, scenario.image_size)
        visible, _ = _visible_keypoint_ids(params, template)
        if len(visible) < scenario.min_visible_keypoints:
            continue
        ground = [i for i in visible if abs(ground_worlds[i][2]) < 1e-9]
        if len(ground) < scenario.min_ground_keypoints:
            continue
        gw = ground_worlds[ground][:, :2]
        spread = np.linalg.svd(gw - gw.mean(axis=0), compute_uv=False)
        if spread[1] < 1.0:
            continue  # near-collinear ground support
        if not is_plausible(params):
            continue
        return params
    raise RuntimeError("could not sample a calibratable camera; check scenario ranges")


def _marking_samples(template: PitchTemplate, name: str) -> np.ndarray:
    marking = template.markings[name]
    if marking.is_conic:
        span = marking.angle_end - marking.angle_start
        endpoint = abs(span - 2 * math.pi) > 1e-12  # full circles wrap anyway
        theta = np.linspace(marking.angle_start, marking.angle_end, CONIC_SAMPLES, endpoint=endpoint)
        return marking.point_at_angle(theta)
    return sample_marking(template, marking, LINE_SAMPLE_STEP_M)


def render_annotation(
    params: CameraParams,
    template: PitchTemplate,
    scenario: SyntheticScenario,
    rng: np.random.Generator,
) -> Annotation:
    """Project the marking samples, clip to frame, corrupt per scenario.

    Classes with fewer than 2 surviving points are omitted.
    """
    points: dict[str, np.ndarray] = {}
    w, h = params.image_size
    for name in template.markings:
        dropped = rng.random() < scenario.dropout_prob
        world = _marking_samples(template, name)
        uv, in_front = project_points(params, world)
        if template.markings[name].is_conic:
            # Border-crossing points lie on the sample chords, off the true
            # curve, so conic annotations keep genuine samples only.
            keep = (
                in_front
                & (uv[:, 0] >= 0.0)
                & (uv[:, 0] <= w)
                & (uv[:, 1] >= 0.0)
                & (uv[:, 1] <= h)
            )
            runs = [uv[keep]] if int(keep.sum()) >= 2 else []
        else:
            runs = clip_projected_polyline(uv, in_front, params.image_size)
        if dropped or not runs:
            continue
        pts = np.concatenate(runs)
        if scenario.noise_sigma_px > 0:
            pts = pts + rng.normal(0.0, scenario.noise_sigma_px, pts.shape)
        if scenario.outlier_prob > 0:
            hits = rng.random(len(pts)) < scenario.outlier_prob
            angles = rng.uniform(0.0, 2 * math.pi, int(hits.sum()))
            pts = pts.copy()
            pts[hits] += scenario.outlier_magnitude_px * np.column_stack(
                [np.cos(angles), np.sin(angles)]
            )
        if len(pts) >= 2:
            points[name] = pts
    return Annotation(params.image_size, points)


def render_detections(
    params: CameraParams,
    template: PitchTemplate,
    scenario: SyntheticScenario,
    rng: np.random.Generator,
) -> tuple[KeypointSet, list[LineObservation]]:
    """Emulated detector output: in-frame keypoints plus line extremities.

    Keypoint confidences are drawn from the configured range; line
    extremities are the ends of the longest visible run of each line
    class.
    """
    keypoints = KeypointSet()
    visible, uv = _visible_keypoint_ids(params, template)
    for i in visible:
        if scenario.keypoint_dropout_prob > 0 and rng.random() < scenario.keypoint_dropout_prob:
            continue
        pos = uv[i].copy()
        if scenario.noise_sigma_px > 0:
            pos = pos + rng.normal(0.0, scenario.noise_sigma_px, 2)
        if scenario.outlier_prob > 0 and rng.random() < scenario.outlier_prob:
            angle = rng.uniform(0.0, 2 * math.pi)
            pos = pos + scenario.outlier_magnitude_px * np.array(
                [math.cos(angle), math.sin(angle)]
            )
        lo, hi = scenario.confidence_range
        conf = float(rng.uniform(lo, hi)) if hi > lo else float(hi)
        keypoints.add(Keypoint(int(i), pos, conf, SOURCE_DETECTOR))

    lines: list[LineObservation] = []
    for name in template.line_class_names:
        world = _marking_samples(template, name)
        luv, in_front = project_points(params, world)
        runs = clip_projected_polyline(luv, in_front, params.image_size)
        if not runs:
            continue
        longest = max(runs, key=lambda r: float(np.linalg.norm(r[-1] - r[0])))
        p1, p2 = longest[0].copy(), longest[-1].copy()
        if np.linalg.norm(p2 - p1) < 1.0:
            continue
        if scenario.noise_sigma_px > 0:
            p1 = p1 + rng.normal(0.0, scenario.noise_sigma_px, 2)
            p2 = p2 + rng.normal(0.0, scenario.noise_sigma_px, 2)
        lo, hi = scenario.confidence_range
        conf = float(rng.uniform(lo, hi)) if hi > lo else float(hi)
        lines.append(LineObservation(name, p1, p2, conf))
    return keypoints, lines
