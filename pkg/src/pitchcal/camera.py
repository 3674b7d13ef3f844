"""Pinhole camera model and keypoint-based calibration.

The camera has a single focal length (square pixels, zero skew and
distortion) and a principal point fixed at the frame centre.  Planar
calibration recovers the focal in closed form from the ground-plane
homography and refines all parameters with damped least squares;
multiplane calibration bootstraps from a full 3x4 projective DLT when
off-ground points (goal crossbars) are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import rq
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .geometry import DegenerateGeometryError, Homography, estimate_homography

_MIN_DEPTH = 1e-9


class CalibrationError(RuntimeError):
    """Raised when camera parameters cannot be estimated from the input."""


@dataclass(frozen=True)
class CameraParams:
    """Pinhole intrinsics and pose.

    ``rotation`` maps world to camera coordinates; ``position`` is the
    camera centre in the world frame (meters).  The principal point is
    always the frame centre.
    """

    focal: float
    rotation: np.ndarray
    position: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self) -> None:
        if self.focal <= 0:
            raise ValueError("focal length must be positive")
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        err = np.max(np.abs(r.T @ r - np.eye(3)))
        if err > 1e-9:
            if err > 1e-6:
                raise ValueError("rotation is not orthonormal")
            u, _, vt = np.linalg.svd(r)
            r = u @ vt
        if np.linalg.det(r) < 0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))

    @property
    def principal_point(self) -> tuple[float, float]:
        return self.image_size[0] / 2.0, self.image_size[1] / 2.0

    @property
    def intrinsics(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array([[self.focal, 0.0, cx], [0.0, self.focal, cy], [0.0, 0.0, 1.0]])

    def ground_homography(self) -> Homography:
        """Map from ground-plane world (x, y) to image pixels."""
        rt = np.column_stack(
            [self.rotation[:, 0], self.rotation[:, 1], -self.rotation @ self.position]
        )
        return Homography(self.intrinsics @ rt)


@dataclass(frozen=True)
class Correspondence:
    """A world point observed at an image position."""

    world: np.ndarray
    image: np.ndarray
    keypoint_id: int | None = None
    confidence: float = 1.0

    def __post_init__(self) -> None:
        w = np.asarray(self.world, dtype=float).reshape(3)
        i = np.asarray(self.image, dtype=float).reshape(2)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(i))):
            raise ValueError("correspondence must be finite")
        object.__setattr__(self, "world", w)
        object.__setattr__(self, "image", i)


@dataclass(frozen=True)
class PlausibilityBounds:
    """Heuristic gate for physically reasonable broadcast cameras."""

    max_height_m: float = 100.0
    max_distance_m: float = 250.0
    focal_range_px: tuple[float, float] = (10.0, 20000.0)


DEFAULT_BOUNDS = PlausibilityBounds()


def _stack(correspondences: Sequence[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    world = np.stack([c.world for c in correspondences])
    image = np.stack([c.image for c in correspondences])
    return world, image


def project_points(params: CameraParams, world: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) world points; returns (pixels (N, 2), in_front (N,)).

    Pixel values for behind-camera points are not meaningful; callers
    must consult the mask.
    """
    pts = np.atleast_2d(np.asarray(world, dtype=float))
    cam = (pts - params.position) @ params.rotation.T
    z = cam[:, 2]
    in_front = z > _MIN_DEPTH
    safe_z = np.where(in_front, z, 1.0)
    cx, cy = params.principal_point
    uv = np.column_stack(
        [params.focal * cam[:, 0] / safe_z + cx, params.focal * cam[:, 1] / safe_z + cy]
    )
    return uv, in_front


def project(params: CameraParams, world) -> tuple[np.ndarray, bool]:
    """Project one world point; returns ((u, v), in_front)."""
    uv, ok = project_points(params, np.asarray(world, dtype=float).reshape(1, 3))
    return uv[0], bool(ok[0])


def backproject_to_ground(params: CameraParams, pixel) -> np.ndarray:
    """World point on z = 0 whose projection is the given pixel."""
    u, v = float(pixel[0]), float(pixel[1])
    cx, cy = params.principal_point
    ray_cam = np.array([(u - cx) / params.focal, (v - cy) / params.focal, 1.0])
    ray = params.rotation.T @ ray_cam
    if abs(ray[2]) < 1e-12:
        raise ValueError("ray is parallel to the ground plane")
    t = -params.position[2] / ray[2]
    if t <= 0:
        raise ValueError("ground plane is behind the camera")
    hit = params.position + t * ray
    hit[2] = 0.0
    return hit


def reprojection_rmse(params: CameraParams, correspondences: Sequence[Correspondence]) -> float:
    """Root-mean-square pixel error; behind-camera points force +inf."""
    if len(correspondences) == 0:
        raise ValueError("reprojection RMSE needs at least one correspondence")
    world, image = _stack(correspondences)
    uv, in_front = project_points(params, world)
    if not np.all(in_front):
        return float("inf")
    return float(np.sqrt(np.mean(np.sum((uv - image) ** 2, axis=1))))


def is_plausible(params: CameraParams, bounds: PlausibilityBounds = DEFAULT_BOUNDS) -> bool:
    """Reject cameras below ground, too high, too far out or with an
    unreasonable focal length.  Boundary values are accepted."""
    x, y, z = params.position
    if not 0.0 < z <= bounds.max_height_m:
        return False
    if abs(x) > bounds.max_distance_m or abs(y) > bounds.max_distance_m:
        return False
    lo, hi = bounds.focal_range_px
    return lo <= params.focal <= hi


def rotation_looking_at(position, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera rotation with the optical axis through ``target``.

    Camera x points image-right, y image-down (aligned with world-down
    for the given up vector), z forward.
    """
    pos = np.asarray(position, dtype=float)
    fwd = np.asarray(target, dtype=float) - pos
    norm = np.linalg.norm(fwd)
    if norm < 1e-12:
        raise ValueError("target coincides with camera position")
    zc = fwd / norm
    xc = np.cross(zc, np.asarray(up, dtype=float))
    xn = np.linalg.norm(xc)
    if xn < 1e-9:
        raise ValueError("view direction is parallel to the up vector")
    xc /= xn
    yc = np.cross(zc, xc)
    return np.stack([xc, yc, zc])


# -- refinement --------------------------------------------------------


@dataclass(frozen=True)
class RefineResult:
    params: CameraParams
    rmse_px: float
    improved: bool


def refine_lm(
    initial: CameraParams,
    correspondences: Sequence[Correspondence],
    max_iterations: int = 200,
) -> RefineResult:
    """Damped least-squares refinement of focal, rotation and position.

    Rotation updates compose an axis-angle increment onto the initial
    rotation.  The result never has a larger RMSE than the input: on
    divergence the initial parameters are returned with ``improved``
    False.
    """
    if len(correspondences) < 4:
        raise ValueError("refinement needs at least 4 correspondences")
    world, image = _stack(correspondences)
    r0 = initial.rotation
    cx, cy = initial.principal_point

    def residuals(x: np.ndarray) -> np.ndarray:
        f = x[0]
        rot = r0 @ Rotation.from_rotvec(x[1:4]).as_matrix()
        cam = (world - x[4:7]) @ rot.T
        z = np.maximum(cam[:, 2], 1e-6)
        uv = np.column_stack([f * cam[:, 0] / z + cx, f * cam[:, 1] / z + cy])
        return (uv - image).ravel()

    x0 = np.concatenate([[initial.focal], np.zeros(3), initial.position])
    initial_rmse = reprojection_rmse(initial, correspondences)
    try:
        sol = least_squares(
            residuals,
            x0,
            method="lm",
            xtol=1e-10,
            ftol=1e-12,
            gtol=1e-12,
            max_nfev=max_iterations * (len(x0) + 1),
        )
        refined = CameraParams(
            focal=float(sol.x[0]),
            rotation=r0 @ Rotation.from_rotvec(sol.x[1:4]).as_matrix(),
            position=sol.x[4:7],
            image_size=initial.image_size,
        )
        refined_rmse = reprojection_rmse(refined, correspondences)
    except (ValueError, np.linalg.LinAlgError):
        return RefineResult(initial, initial_rmse, False)
    if not math.isfinite(refined_rmse) or refined_rmse > initial_rmse:
        return RefineResult(initial, initial_rmse, False)
    return RefineResult(refined, refined_rmse, True)


# -- planar (ground homography) calibration ----------------------------


def focal_from_ground_homography(h: Homography, image_size: tuple[int, int]) -> float:
    """Closed-form focal from one plane homography with a known principal
    point, averaging the orthogonality and equal-norm estimates."""
    cx, cy = image_size[0] / 2.0, image_size[1] / 2.0
    ht = h.matrix.copy()
    ht[0] -= cx * ht[2]
    ht[1] -= cy * ht[2]
    ht /= np.max(np.abs(ht))
    h1, h2 = ht[:, 0], ht[:, 1]

    candidates = []
    denom = h1[2] * h2[2]
    if abs(denom) > 1e-12:
        f2 = -(h1[0] * h2[0] + h1[1] * h2[1]) / denom
        if f2 > 0:
            candidates.append(math.sqrt(f2))
    denom = h2[2] ** 2 - h1[2] ** 2
    if abs(denom) > 1e-12:
        f2 = (h1[0] ** 2 + h1[1] ** 2 - h2[0] ** 2 - h2[1] ** 2) / denom
        if f2 > 0:
            candidates.append(math.sqrt(f2))
    if not candidates:
        raise CalibrationError("focal length not recoverable from homography")
    return float(np.mean(candidates))


def _nearest_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def pose_from_ground_homography(
    h: Homography, focal: float, image_size: tuple[int, int], world: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and camera centre from a ground homography and focal.

    The pose sign is chosen so the given ground points sit in front of
    the camera and the camera is above ground.
    """
    cx, cy = image_size[0] / 2.0, image_size[1] / 2.0
    ht = h.matrix.copy()
    ht[0] -= cx * ht[2]
    ht[1] -= cy * ht[2]
    hp = np.diag([1.0 / focal, 1.0 / focal, 1.0]) @ ht
    n1, n2 = np.linalg.norm(hp[:, 0]), np.linalg.norm(hp[:, 1])
    if n1 < 1e-12 or n2 < 1e-12:
        raise CalibrationError("degenerate homography columns")
    world3 = np.column_stack([world[:, 0], world[:, 1], np.zeros(len(world))])

    best = None
    for sign in (1.0, -1.0):
        r0 = sign * hp[:, 0] / n1
        r1 = sign * hp[:, 1] / n2
        rot = _nearest_rotation(np.column_stack([r0, r1, np.cross(r0, r1)]))
        t = sign * hp[:, 2] / math.sqrt(n1 * n2)
        center = -rot.T @ t
        depth = (world3 - center) @ rot[2]
        score = float(np.mean(depth > 0)) + (0.5 if center[2] > 0 else 0.0)
        if best is None or score > best[0]:
            best = (score, rot, center)
    return best[1], best[2]


def calibrate_planar(
    correspondences: Sequence[Correspondence], image_size: tuple[int, int]
) -> RefineResult:
    """Calibrate from ground-plane (z = 0) correspondences.

    Estimates the world-to-image homography, recovers the focal length in
    closed form, decomposes the pose and refines everything.
    """
    if len(correspondences) < 4:
        raise CalibrationError("planar calibration needs at least 4 correspondences")
    world, image = _stack(correspondences)
    if np.max(np.abs(world[:, 2])) > 1e-9:
        raise CalibrationError("planar calibration requires world z = 0")
    try:
        h = estimate_homography(world[:, :2], image)
    except (DegenerateGeometryError, ValueError) as exc:
        raise CalibrationError(f"homography estimation failed: {exc}") from exc
    focal = focal_from_ground_homography(h, image_size)
    rot, center = pose_from_ground_homography(h, focal, image_size, world[:, :2])
    if center[2] <= 0:
        raise CalibrationError("decomposed camera is not above the ground")
    try:
        initial = CameraParams(focal, rot, center, image_size)
    except ValueError as exc:
        raise CalibrationError(f"invalid decomposed pose: {exc}") from exc
    return refine_lm(initial, correspondences)


# -- multiplane (full projective DLT) calibration ----------------------


def _projection_dlt(world: np.ndarray, image: np.ndarray) -> np.ndarray:
    n = len(world)
    wc = world.mean(axis=0)
    ws = float(np.mean(np.linalg.norm(world - wc, axis=1)))
    ic = image.mean(axis=0)
    iscale = float(np.mean(np.linalg.norm(image - ic, axis=1)))
    sw = math.sqrt(3.0) / ws if ws > 1e-12 else 1.0
    si = math.sqrt(2.0) / iscale if iscale > 1e-12 else 1.0
    wn = (world - wc) * sw
    im = (image - ic) * si

    a = np.zeros((2 * n, 12))
    wh = np.column_stack([wn, np.ones(n)])
    a[0::2, 0:4] = wh
    a[0::2, 8:12] = -im[:, 0:1] * wh
    a[1::2, 4:8] = wh
    a[1::2, 8:12] = -im[:, 1:2] * wh
    _, sv, vt = np.linalg.svd(a)
    if int(np.sum(sv > 1e-10 * sv[0])) < 11:
        raise CalibrationError("rank-deficient projection DLT")
    p_norm = vt[-1].reshape(3, 4)

    t3 = np.eye(4)
    t3[:3, :3] *= sw
    t3[:3, 3] = -sw * wc
    t2 = np.array([[si, 0.0, -si * ic[0]], [0.0, si, -si * ic[1]], [0.0, 0.0, 1.0]])
    p = np.linalg.inv(t2) @ p_norm @ t3

    # Fix the overall sign so observed points have positive depth.
    wh_full = np.column_stack([world, np.ones(n)])
    depths = wh_full @ p[2]
    if np.sum(depths > 0) < n / 2:
        p = -p
    return p


def decompose_projection(p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RQ decomposition of a 3x4 projection into (K, R, camera centre)."""
    m = p[:, :3]
    if abs(np.linalg.det(m)) < 1e-15:
        raise CalibrationError("projection matrix is singular")
    k, r = rq(m)
    d = np.diag(np.where(np.diag(k) >= 0, 1.0, -1.0))
    k = k @ d
    r = d @ r
    if np.linalg.det(r) < 0:
        r = -r
    center = -np.linalg.solve(m, p[:, 3])
    k = k / k[2, 2]
    return k, _nearest_rotation(r), center


def calibrate_multiplane(
    correspondences: Sequence[Correspondence], image_size: tuple[int, int]
) -> RefineResult:
    """Calibrate from correspondences spanning the ground and goal planes.

    Runs a full 3x4 projective DLT, discards the unconstrained principal
    point and skew from the decomposition and re-fits under the
    fixed-centre zero-skew model.  Coplanar ground input falls back to
    planar calibration.
    """
    if len(correspondences) < 6:
        raise CalibrationError("multiplane calibration needs at least 6 correspondences")
    world, image = _stack(correspondences)
    centered = world - world.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[2] <= 1e-9 * max(sv[0], 1.0):
        if np.max(np.abs(world[:, 2])) <= 1e-9:
            return calibrate_planar(correspondences, image_size)
        raise CalibrationError("coplanar off-ground configuration is not calibratable")
    p = _projection_dlt(world, image)
    k, rot, center = decompose_projection(p)
    focal = (k[0, 0] + k[1, 1]) / 2.0
    if focal <= 0:
        raise CalibrationError("decomposed focal is not positive")
    try:
        initial = CameraParams(focal, rot, center, image_size)
    except ValueError as exc:
        raise CalibrationError(f"invalid decomposed pose: {exc}") from exc
    result = refine_lm(initial, correspondences)
    if not math.isfinite(result.rmse_px):
        raise CalibrationError("refinement failed from DLT initialization")
    return result


# -- serialization ------------------------------------------------------


def camera_to_dict(params: CameraParams, rmse_px: float | None = None) -> dict:
    return {
        "focal_px": float(params.focal),
        "principal_point": [params.principal_point[0], params.principal_point[1]],
        "rotation": params.rotation.tolist(),
        "position_m": params.position.tolist(),
        "image_size": [params.image_size[0], params.image_size[1]],
        "rmse_px": float(rmse_px) if rmse_px is not None else None,
    }


def camera_from_dict(data: dict) -> CameraParams:
    return CameraParams(
        focal=float(data["focal_px"]),
        rotation=np.array(data["rotation"], dtype=float),
        position=np.array(data["position_m"], dtype=float),
        image_size=(int(data["image_size"][0]), int(data["image_size"][1])),
    )
