"""Subset-voting calibration selection.

Calibration is repeated on four keypoint subsets (all points, line-line
intersections only, RANSAC-filtered ground plane, full ground plane) and
the winner is picked by reprojection RMSE, preferring the all-points
solution whenever it reprojects below the preference threshold.  The
iterative variant retries at descending confidence thresholds; line
observations are fused in as extra intersections when the frame carries
too few keypoints of its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import (
    DEFAULT_BOUNDS,
    CalibrationError,
    CameraParams,
    Correspondence,
    PlausibilityBounds,
    calibrate_multiplane,
    calibrate_planar,
    is_plausible,
)
from .derive import SOURCE_FUSION, Keypoint, KeypointSet, LineObservation
from .geometry import DegenerateGeometryError, Line2, intersect_lines, ransac_homography_filter
from .pitch import LINE_LINE, PitchTemplate

SUBSET_ALL = "all"
SUBSET_LINE_LINE = "line_line_only"
SUBSET_GROUND_RANSAC = "ground_ransac"
SUBSET_GROUND_ALL = "ground_all"
SUBSET_ORDER = (SUBSET_ALL, SUBSET_LINE_LINE, SUBSET_GROUND_RANSAC, SUBSET_GROUND_ALL)


@dataclass(frozen=True)
class VoterConfig:
    rmse_preference_px: float = 5.0
    ransac_tolerance_px: float = 5.0
    confidence_thresholds: tuple[float, float, float] = (0.5, 0.3, 0.1)
    min_keypoints_for_no_fusion: int = 7
    ransac_seed: int = 0
    bounds: PlausibilityBounds = field(default_factory=PlausibilityBounds)

    def __post_init__(self) -> None:
        if self.rmse_preference_px <= 0 or self.ransac_tolerance_px <= 0:
            raise ValueError("tolerances must be positive")
        if list(self.confidence_thresholds) != sorted(
            set(self.confidence_thresholds), reverse=True
        ):
            raise ValueError("confidence thresholds must be strictly descending")


@dataclass(frozen=True)
class CalibrationOutcome:
    """A plausible calibration, its source subset and its support RMSE."""

    params: CameraParams
    subset: str
    rmse_px: float
    used_ids: tuple[int, ...]


def _correspondences(template: PitchTemplate, keypoints: list[Keypoint]) -> list[Correspondence]:
    return [
        Correspondence(
            world=template.keypoint(kp.id).world,
            image=kp.position,
            keypoint_id=kp.id,
            confidence=kp.confidence,
        )
        for kp in keypoints
    ]


def _build_subsets(
    template: PitchTemplate, filtered: list[Keypoint], config: VoterConfig
) -> dict[str, list[Keypoint]]:
    ground = [kp for kp in filtered if abs(template.keypoint(kp.id).world[2]) < 1e-9]
    subsets = {
        SUBSET_ALL: filtered,
        SUBSET_LINE_LINE: [
            kp for kp in filtered if template.keypoint(kp.id).family == LINE_LINE
        ],
        SUBSET_GROUND_RANSAC: [],
        SUBSET_GROUND_ALL: ground,
    }
    if len(ground) >= 4:
        world = np.stack([template.keypoint(kp.id).world[:2] for kp in ground])
        image = np.stack([kp.position for kp in ground])
        try:
            inliers, _ = ransac_homography_filter(
                world,
                image,
                tolerance_px=config.ransac_tolerance_px,
                seed=config.ransac_seed,
            )
            subsets[SUBSET_GROUND_RANSAC] = [kp for kp, ok in zip(ground, inliers) if ok]
        except (DegenerateGeometryError, ValueError):
            pass
    return subsets


def vote(
    template: PitchTemplate,
    keypoints: KeypointSet,
    threshold: float,
    config: VoterConfig,
    image_size: tuple[int, int],
) -> CalibrationOutcome | None:
    """Calibrate each subset of sufficiently confident keypoints and pick
    the winner.

    Subsets containing off-ground points (crossbars) use multiplane
    calibration, the rest the planar path.  Implausible results are
    discarded; each candidate is scored by the reprojection RMSE on its
    own calibration points.  The all-points candidate wins outright when
    its RMSE is below the preference threshold, otherwise the lowest
    RMSE wins.  Returns None when every subset fails.
    """
    filtered = [kp for kp in keypoints if kp.confidence >= threshold]
    candidates: dict[str, CalibrationOutcome] = {}
    for label, subset in _build_subsets(template, filtered, config).items():
        if len(subset) < 4:
            continue
        corrs = _correspondences(template, subset)
        off_ground = any(abs(c.world[2]) > 1e-9 for c in corrs)
        try:
            if off_ground:
                result = calibrate_multiplane(corrs, image_size)
            else:
                result = calibrate_planar(corrs, image_size)
        except (CalibrationError, ValueError):
            continue
        if not np.isfinite(result.rmse_px):
            continue
        if not is_plausible(result.params, config.bounds):
            continue
        candidates[label] = CalibrationOutcome(
            params=result.params,
            subset=label,
            rmse_px=result.rmse_px,
            used_ids=tuple(kp.id for kp in subset),
        )

    if not candidates:
        return None
    preferred = candidates.get(SUBSET_ALL)
    if preferred is not None and preferred.rmse_px < config.rmse_preference_px:
        return preferred
    return min(candidates.values(), key=lambda c: (c.rmse_px, SUBSET_ORDER.index(c.subset)))


def iterative_vote(
    template: PitchTemplate,
    keypoints: KeypointSet,
    config: VoterConfig,
    image_size: tuple[int, int],
) -> CalibrationOutcome | None:
    """Run the vote at descending confidence thresholds and keep the
    first (highest-confidence) success."""
    for threshold in config.confidence_thresholds:
        outcome = vote(template, keypoints, threshold, config, image_size)
        if outcome is not None:
            return outcome
    return None


def fuse_lines(
    template: PitchTemplate,
    keypoints: KeypointSet,
    lines: list[LineObservation],
    image_size: tuple[int, int],
    config: VoterConfig,
) -> KeypointSet:
    """Insert intersections of observed lines for missing keypoint ids.

    Runs only when the frame shows fewer in-frame keypoints than
    ``min_keypoints_for_no_fusion``.  Fused intersections may lie far
    outside the image; existing keypoints are never replaced.
    """
    w, h = image_size
    in_frame = sum(
        1
        for kp in keypoints
        if 0.0 <= kp.position[0] <= w and 0.0 <= kp.position[1] <= h
    )
    if in_frame >= config.min_keypoints_for_no_fusion:
        return KeypointSet(list(keypoints))

    best_lines: dict[str, LineObservation] = {}
    for obs in lines:
        cur = best_lines.get(obs.class_name)
        if cur is None or obs.confidence > cur.confidence:
            best_lines[obs.class_name] = obs

    fused = KeypointSet(list(keypoints))
    for kp_def in template.keypoints_of_family(LINE_LINE):
        if kp_def.id in fused:
            continue
        obs_a = best_lines.get(kp_def.classes[0])
        obs_b = best_lines.get(kp_def.classes[1])
        if obs_a is None or obs_b is None:
            continue
        try:
            pos = intersect_lines(
                Line2.through(obs_a.p1, obs_a.p2), Line2.through(obs_b.p1, obs_b.p2)
            )
        except DegenerateGeometryError:
            continue
        fused.add(
            Keypoint(
                kp_def.id,
                pos,
                min(obs_a.confidence, obs_b.confidence),
                SOURCE_FUSION,
            )
        )
    return fused


def calibrate_frame(
    template: PitchTemplate,
    keypoints: KeypointSet,
    lines: list[LineObservation],
    config: VoterConfig,
    image_size: tuple[int, int],
) -> CalibrationOutcome | None:
    """Full per-frame pipeline: line fusion, then the iterative vote."""
    fused = fuse_lines(template, keypoints, lines, image_size, config)
    return iterative_vote(template, fused, config, image_size)
