"""Derivation of structural keypoints from per-class marking annotations.

Annotated polylines are converted into the 57 template keypoints by line
fitting and intersection, ellipse fitting with analytic line/conic
intersection, pole-polar tangent construction and homography projection
of the remaining axis/circle points.  A final left-right remap makes the
goal nearest the camera carry the left-side ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .camera import CalibrationError, focal_from_ground_homography, pose_from_ground_homography
from .pitch import EXTRA, LINE_CONIC, LINE_LINE, TANGENT, KeypointDef, PitchTemplate

SOURCE_ANNOTATION = "annotation_derived"
SOURCE_DETECTOR = "detector"
SOURCE_FUSION = "line_fusion"

MIN_LINE_POINTS = 2
MIN_CONIC_POINTS = 5
# A conic observation flatter than this (max deviation from the best-fit
# line, px) cannot support a stable ellipse fit and is skipped.
MIN_CONIC_SAGITTA_PX = 3.0
# With a homography available, analytic solutions farther than this from
# their expected projection are treated as fit noise and dropped.
MAX_MATCH_DISTANCE_PX = 25.0


@dataclass(frozen=True)
class Annotation:
    """Observed 2D polylines for one image, in pixels, keyed by class name."""

    image_size: tuple[int, int]
    points: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[str, np.ndarray] = {}
        for name, pts in self.points.items():
            arr = np.atleast_2d(np.asarray(pts, dtype=float))
            if arr.size == 0:
                continue
            if arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
                raise ValueError(f"invalid points for class {name!r}")
            clean[name] = arr
        object.__setattr__(self, "points", clean)
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))

    def get(self, name: str) -> np.ndarray | None:
        return self.points.get(name)


@dataclass(frozen=True)
class Keypoint:
    """A detected or derived image keypoint (may lie outside the frame)."""

    id: int
    position: np.ndarray
    confidence: float = 1.0
    source: str = SOURCE_ANNOTATION

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))


@dataclass(frozen=True)
class LineObservation:
    """A detected line given as two extremities (orderless)."""

    class_name: str
    p1: np.ndarray
    p2: np.ndarray
    confidence: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float).reshape(2))
        object.__setattr__(self, "p2", np.asarray(self.p2, dtype=float).reshape(2))


class KeypointSet:
    """At most one keypoint per id."""

    def __init__(self, keypoints: list[Keypoint] | None = None):
        self._by_id: dict[int, Keypoint] = {}
        for kp in keypoints or []:
            self.add(kp)

    def add(self, kp: Keypoint, overwrite: bool = False) -> bool:
        if kp.id in self._by_id and not overwrite:
            return False
        self._by_id[kp.id] = kp
        return True

    def get(self, keypoint_id: int) -> Keypoint | None:
        return self._by_id.get(keypoint_id)

    def __contains__(self, keypoint_id: int) -> bool:
        return keypoint_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self):
        return iter(sorted(self._by_id.values(), key=lambda k: k.id))

    @property
    def ids(self) -> list[int]:
        return sorted(self._by_id)

    def merged(self, other: "KeypointSet") -> "KeypointSet":
        """Union keeping existing entries on id collisions."""
        out = KeypointSet(list(self))
        for kp in other:
            out.add(kp)
        return out


def ground_homography_from_keypoints(
    template: PitchTemplate, keypoints: KeypointSet
) -> geo.Homography | None:
    """World (x, y) to image homography from the ground-plane keypoints."""
    world, image = [], []
    for kp in keypoints:
        w = template.keypoint(kp.id).world
        if abs(w[2]) < 1e-9:
            world.append(w[:2])
            image.append(kp.position)
    if len(world) < 4:
        return None
    try:
        return geo.estimate_homography(np.array(world), np.array(image))
    except (geo.DegenerateGeometryError, ValueError):
        return None


def derive_line_line(template: PitchTemplate, annotation: Annotation) -> KeypointSet:
    """Two-step fitted intersections for every line-line keypoint whose
    defining classes are both annotated with enough points."""
    out = KeypointSet()
    for kp_def in template.keypoints_of_family(LINE_LINE):
        pts_a = annotation.get(kp_def.classes[0])
        pts_b = annotation.get(kp_def.classes[1])
        if pts_a is None or pts_b is None:
            continue
        if len(pts_a) < MIN_LINE_POINTS or len(pts_b) < MIN_LINE_POINTS:
            continue
        try:
            pos = geo.refine_intersection(pts_a, pts_b)
        except geo.DegenerateGeometryError:
            continue
        out.add(Keypoint(kp_def.id, pos, 1.0, SOURCE_ANNOTATION))
    return out


def _fit_annotated_conics(template: PitchTemplate, annotation: Annotation) -> dict[str, geo.Conic]:
    conics: dict[str, geo.Conic] = {}
    for name in template.conic_class_names:
        pts = annotation.get(name)
        if pts is None or len(pts) < MIN_CONIC_POINTS:
            continue
        try:
            flat = geo.fit_line(pts)
            if np.max(np.abs(flat.signed_distance(pts))) < MIN_CONIC_SAGITTA_PX:
                continue  # nearly straight observation, fit would be unstable
            conics[name] = geo.fit_ellipse(pts)
        except geo.DegenerateGeometryError:
            continue
    return conics


def _signed_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return geo.cross2(b - a, c - a)


def _pair_image_to_world(
    candidates: list[np.ndarray],
    world_candidates: np.ndarray,
    h: geo.Homography | None,
    references: list[tuple[np.ndarray, np.ndarray]],
) -> dict[int, int]:
    """Pair analytic image solutions with their world counterparts.

    With a homography the expected image positions decide directly.
    Otherwise an orientation test is used: the ground-to-image map of any
    above-ground camera reverses plane orientation, so a reference point
    with known world and image positions fixes the pairing of a solution
    pair whenever the three points are not collinear.  Returns a map
    world-candidate index -> image-candidate index; empty when the
    pairing is ambiguous.
    """
    if not candidates:
        return {}
    if h is not None:
        expected = h.apply(world_candidates)
        order = sorted(
            (float(np.linalg.norm(cand - exp)), wi, ci)
            for wi, exp in enumerate(expected)
            for ci, cand in enumerate(candidates)
        )
        pairing: dict[int, int] = {}
        taken: set[int] = set()
        for dist, wi, ci in order:
            if wi in pairing or ci in taken or dist > MAX_MATCH_DISTANCE_PX:
                continue
            pairing[wi] = ci
            taken.add(ci)
        return pairing
    if len(candidates) != 2 or len(world_candidates) != 2:
        return {}
    for ref_world, ref_image in references:
        area_w = _signed_area(ref_world, world_candidates[0], world_candidates[1])
        area_i = _signed_area(ref_image, candidates[0], candidates[1])
        if abs(area_w) < 1e-6 or abs(area_i) < 1e-3:
            continue  # collinear reference cannot orient the pair
        if (area_w > 0) != (area_i > 0):
            return {0: 0, 1: 1}
        return {0: 1, 1: 0}
    return {}


def derive_line_conic(
    template: PitchTemplate, annotation: Annotation, base: KeypointSet | None = None
) -> KeypointSet:
    """Analytic ellipse/line intersections for the line-conic keypoints."""
    out = KeypointSet()
    conics = _fit_annotated_conics(template, annotation)
    h = ground_homography_from_keypoints(template, base) if base is not None else None
    references = (
        [(template.keypoint(kp.id).world[:2], kp.position) for kp in base]
        if base is not None
        else []
    )

    pairs: dict[tuple[str, str], list[KeypointDef]] = {}
    for kp_def in template.keypoints_of_family(LINE_CONIC):
        pairs.setdefault((kp_def.classes[0], kp_def.classes[1]), []).append(kp_def)

    for (conic_name, line_name), defs in pairs.items():
        conic = conics.get(conic_name)
        line_pts = annotation.get(line_name)
        if conic is None or line_pts is None or len(line_pts) < MIN_LINE_POINTS:
            continue
        try:
            line = geo.fit_line(line_pts)
        except geo.DegenerateGeometryError:
            continue
        solutions = geo.intersect_line_conic(line, conic)
        def_worlds = np.stack([d.world[:2] for d in defs])
        pairing = _pair_image_to_world(solutions, def_worlds, h, references)
        for wi, ci in pairing.items():
            out.add(Keypoint(defs[wi].id, solutions[ci], 1.0, SOURCE_ANNOTATION))
    return out


def derive_tangent(
    template: PitchTemplate, annotation: Annotation, anchors: KeypointSet
) -> KeypointSet:
    """Tangency points on fitted conics from already-derived anchor
    intersections; lens distortion is assumed zero so tangency transfers
    from the world template."""
    out = KeypointSet()
    conics = _fit_annotated_conics(template, annotation)
    h = ground_homography_from_keypoints(template, anchors)

    groups: dict[tuple[str, int], list[KeypointDef]] = {}
    for kp_def in template.keypoints_of_family(TANGENT):
        groups.setdefault((kp_def.classes[0], kp_def.anchor_id), []).append(kp_def)

    for (conic_name, anchor_id), defs in groups.items():
        conic = conics.get(conic_name)
        anchor = anchors.get(anchor_id)
        if conic is None or anchor is None:
            continue
        try:
            solutions = geo.tangent_points(anchor.position, conic)
        except geo.DegenerateGeometryError:
            continue

        marking = template.markings[conic_name]
        world_circle = geo.Conic.from_ellipse(marking.center[:2], (marking.radius, marking.radius))
        anchor_world = template.keypoint(anchor_id).world[:2]
        try:
            world_solutions = np.array(geo.tangent_points(anchor_world, world_circle))
        except geo.DegenerateGeometryError:
            continue

        pairing = _pair_image_to_world(
            solutions, world_solutions, h, [(anchor_world, anchor.position)]
        )
        for kp_def in defs:
            dists = np.linalg.norm(world_solutions - kp_def.world[:2], axis=1)
            wi = int(np.argmin(dists))
            if dists[wi] < 1e-6 and wi in pairing:
                out.add(Keypoint(kp_def.id, solutions[pairing[wi]], 1.0, SOURCE_ANNOTATION))
    return out


def _homography_depths(h: geo.Homography, world_xy: np.ndarray) -> np.ndarray:
    pts = np.column_stack([world_xy, np.ones(len(world_xy))])
    return pts @ h.matrix[2]


def derive_extra(template: PitchTemplate, base: KeypointSet) -> KeypointSet:
    """Homography-projected axis and quarter-turn keypoints.

    Requires at least 4 non-collinear ground-plane keypoints in ``base``;
    otherwise returns an empty set.  Points on the far side of the
    camera's principal plane wrap through infinity under the homography,
    so only points on the same side as the base keypoints are emitted
    (they may still fall outside the frame).
    """
    out = KeypointSet()
    h = ground_homography_from_keypoints(template, base)
    if h is None:
        return out
    base_world = np.stack(
        [template.keypoint(kp.id).world[:2] for kp in base if abs(template.keypoint(kp.id).world[2]) < 1e-9]
    )
    side = 1.0 if float(np.median(_homography_depths(h, base_world))) >= 0 else -1.0

    defs = template.keypoints_of_family(EXTRA)
    worlds = np.stack([d.world[:2] for d in defs])
    depths = _homography_depths(h, worlds) * side
    scale = float(np.max(np.abs(_homography_depths(h, base_world))))
    projected = h.apply(worlds)
    for kp_def, pos, depth in zip(defs, projected, depths):
        if depth < 1e-6 * scale:
            continue
        out.add(Keypoint(kp_def.id, pos, 1.0, SOURCE_ANNOTATION))
    return out


def remap_left_right(
    template: PitchTemplate, keypoints: KeypointSet, image_size: tuple[int, int]
) -> KeypointSet:
    """Relabel ids so the goal nearest the camera is the left side.

    The camera side is recovered by decomposing the ground homography of
    the keypoints themselves.  When no homography is estimable, or the
    camera is already nearer the left goal, the input ids are kept.
    The operation is idempotent.
    """
    h = ground_homography_from_keypoints(template, keypoints)
    if h is None:
        return KeypointSet(list(keypoints))
    try:
        focal = focal_from_ground_homography(h, image_size)
        world = np.stack(
            [template.keypoint(kp.id).world[:2] for kp in keypoints]
        )
        _, center = pose_from_ground_homography(h, focal, image_size, world)
    except (CalibrationError, geo.DegenerateGeometryError):
        return KeypointSet(list(keypoints))
    if center[0] <= 0:  # equidistant ties keep the current labelling
        return KeypointSet(list(keypoints))
    return KeypointSet(
        [
            Keypoint(template.keypoint(kp.id).mirror_id, kp.position, kp.confidence, kp.source)
            for kp in keypoints
        ]
    )


def derive_keypoints(
    template: PitchTemplate, annotation: Annotation, remap: bool = True
) -> KeypointSet:
    """Full derivation pipeline for one annotated image.

    ``remap=False`` keeps the template's own left/right labelling, which
    is the convention detector emulations use.
    """
    intersections = derive_line_line(template, annotation)
    conic_points = derive_line_conic(template, annotation, base=intersections)
    merged = intersections.merged(conic_points)
    tangents = derive_tangent(template, annotation, anchors=merged)
    merged = merged.merged(tangents)
    extras = derive_extra(template, merged)
    merged = merged.merged(extras)
    if not remap:
        return merged
    return remap_left_right(template, merged, annotation.image_size)
