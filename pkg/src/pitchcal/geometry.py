"""Planar fitting and intersection primitives.

Total-least-squares line fitting, numerically stable ellipse fitting on
the scatter-matrix block decomposition, analytic line/conic intersection,
pole-polar tangent points, normalized DLT homography estimation and a
seeded RANSAC homography filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised when the input configuration does not determine a result."""


@dataclass(frozen=True)
class Line2:
    """Line nx*x + ny*y + d = 0 with unit normal (nx, ny)."""

    nx: float
    ny: float
    d: float

    def __post_init__(self) -> None:
        norm = float(np.hypot(self.nx, self.ny))
        if abs(norm - 1.0) > 1e-12:
            if norm < 1e-300:
                raise DegenerateGeometryError("zero normal vector")
            object.__setattr__(self, "nx", self.nx / norm)
            object.__setattr__(self, "ny", self.ny / norm)
            object.__setattr__(self, "d", self.d / norm)

    @classmethod
    def through(cls, p: np.ndarray, q: np.ndarray) -> "Line2":
        """Line through two distinct points."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        t = q - p
        norm = float(np.hypot(*t))
        if norm < 1e-12:
            raise DegenerateGeometryError("coincident points")
        nx, ny = -t[1] / norm, t[0] / norm
        return cls(nx, ny, -(nx * p[0] + ny * p[1]))

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.nx, self.ny])

    @property
    def direction(self) -> np.ndarray:
        """Unit tangent."""
        return np.array([-self.ny, self.nx])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.normal + self.d

    def point_on(self) -> np.ndarray:
        """Foot of the origin perpendicular."""
        return -self.d * self.normal


def fit_line(points: np.ndarray) -> Line2:
    """Orthogonal-regression line minimizing squared perpendicular distances.

    Handles vertical lines; raises on < 2 points or when all points are
    within 1e-9 of one location.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 2:
        raise DegenerateGeometryError("need at least 2 points to fit a line")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    if np.max(np.abs(centered)) < 1e-9:
        raise DegenerateGeometryError("all points coincident")
    # Smallest-variance direction of the scatter matrix is the normal.
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    nx, ny = vt[-1]
    return Line2(nx, ny, -(nx * centroid[0] + ny * centroid[1]))


def intersect_lines(a: Line2, b: Line2) -> np.ndarray:
    """Intersection point of two non-parallel lines."""
    cross = a.nx * b.ny - a.ny * b.nx  # sin of the angle between them
    if abs(cross) < 1e-6:
        raise DegenerateGeometryError("lines are (near-)parallel")
    x = (-a.d * b.ny + b.d * a.ny) / cross
    y = (-b.d * a.nx + a.d * b.nx) / cross
    return np.array([x, y])


def refine_intersection(
    points_a: np.ndarray,
    points_b: np.ndarray,
    max_refit_points: int = 4,
) -> np.ndarray:
    """Two-step intersection of two noisily sampled lines.

    First intersects lines fitted to the full point sets, then refits each
    line on the ``min(max_refit_points, n)`` points nearest that coarse
    intersection (at least 2) and intersects again.  The local refit
    suppresses curvature and far-away outliers.
    """
    pts_a = np.atleast_2d(np.asarray(points_a, dtype=float))
    pts_b = np.atleast_2d(np.asarray(points_b, dtype=float))
    coarse = intersect_lines(fit_line(pts_a), fit_line(pts_b))

    def nearest(pts: np.ndarray) -> np.ndarray:
        k = max(2, min(max_refit_points, pts.shape[0]))
        order = np.argsort(np.linalg.norm(pts - coarse, axis=1))
        return pts[order[:k]]

    return intersect_lines(fit_line(nearest(pts_a)), fit_line(nearest(pts_b)))


@dataclass(frozen=True)
class Conic:
    """Conic A x^2 + B xy + C y^2 + D x + E y + F = 0, restricted to ellipses.

    Coefficients are normalized to a unit-norm vector; the ellipse form
    (center, semi-axes, rotation) is derived at construction.
    """

    coefficients: np.ndarray
    center: np.ndarray = field(init=False)
    semi_axes: tuple[float, float] = field(init=False)
    angle: float = field(init=False)

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (6,):
            raise ValueError("conic needs 6 coefficients")
        norm = float(np.linalg.norm(coef))
        if norm < 1e-300:
            raise DegenerateGeometryError("zero conic")
        coef = coef / norm
        a, b, c, d, e, f = coef
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            raise DegenerateGeometryError("conic is not an ellipse")
        # Canonical sign: interior of the ellipse evaluates negative.
        cx = (2.0 * c * d - b * e) / disc
        cy = (2.0 * a * e - b * d) / disc
        if a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f > 0:
            coef = -coef
            a, b, c, d, e, f = coef
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "center", np.array([cx, cy]))

        # Eigen-decomposition of the quadratic part gives axes and angle.
        fc = a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f
        q = np.array([[a, b / 2.0], [b / 2.0, c]])
        evals, evecs = np.linalg.eigh(q)
        if np.any(evals * (-fc) <= 0):
            raise DegenerateGeometryError("degenerate ellipse")
        axes = np.sqrt(-fc / evals)
        major = int(np.argmax(axes))
        minor = 1 - major
        angle = float(np.arctan2(evecs[1, major], evecs[0, major])) % np.pi
        object.__setattr__(self, "semi_axes", (float(axes[major]), float(axes[minor])))
        object.__setattr__(self, "angle", angle)

    @classmethod
    def from_ellipse(
        cls, center, semi_axes, angle: float = 0.0
    ) -> "Conic":
        """Conic coefficients of the ellipse with the given parameters."""
        cx, cy = float(center[0]), float(center[1])
        ra, rb = float(semi_axes[0]), float(semi_axes[1])
        ca, sa = np.cos(angle), np.sin(angle)
        a = (ca / ra) ** 2 + (sa / rb) ** 2
        b = 2.0 * ca * sa * (1.0 / ra**2 - 1.0 / rb**2)
        c = (sa / ra) ** 2 + (ca / rb) ** 2
        d = -2.0 * a * cx - b * cy
        e = -2.0 * c * cy - b * cx
        f = a * cx * cx + b * cx * cy + c * cy * cy - 1.0
        return cls(np.array([a, b, c, d, e, f]))

    @property
    def matrix(self) -> np.ndarray:
        """Symmetric 3x3 homogeneous conic matrix."""
        a, b, c, d, e, f = self.coefficients
        return np.array(
            [
                [a, b / 2.0, d / 2.0],
                [b / 2.0, c, e / 2.0],
                [d / 2.0, e / 2.0, f],
            ]
        )

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a, b, c, d, e, f = self.coefficients
        x, y = pts[:, 0], pts[:, 1]
        return a * x * x + b * x * y + c * y * y + d * x + e * y + f

    def sample(self, n: int) -> np.ndarray:
        """n parametric samples over the full ellipse."""
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        ra, rb = self.semi_axes
        ca, sa = np.cos(self.angle), np.sin(self.angle)
        x = ra * np.cos(t)
        y = rb * np.sin(t)
        return np.column_stack(
            [self.center[0] + ca * x - sa * y, self.center[1] + sa * x + ca * y]
        )


def fit_ellipse(points: np.ndarray) -> Conic:
    """Ellipse-specific least-squares fit (stable block-partitioned form).

    Solves the constrained problem on the partitioned scatter matrix so an
    ellipse is guaranteed whenever the data admits one.  Input is centered
    and scaled internally for conditioning.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 5:
        raise DegenerateGeometryError("need at least 5 points to fit an ellipse")
    mean = pts.mean(axis=0)
    scale = float(np.mean(np.linalg.norm(pts - mean, axis=1)))
    if scale < 1e-9:
        raise DegenerateGeometryError("all points coincident")
    x, y = (pts[:, 0] - mean[0]) / scale, (pts[:, 1] - mean[1]) / scale

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("degenerate point configuration") from exc
    m = s1 + s2 @ t
    # Apply the inverse constraint matrix C1^-1 for x^T C x = 1.
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    evals, evecs = np.linalg.eig(m)
    # The ellipse solution satisfies 4*a1*a3 - a2^2 > 0.
    re = np.real(evecs)
    cond = 4.0 * re[0] * re[2] - re[1] ** 2
    near_real = np.abs(np.imag(evals)) <= 1e-8 * (1.0 + np.abs(evals))
    valid = np.where(near_real & (cond > 0))[0]
    if valid.size == 0:
        raise DegenerateGeometryError("no ellipse fits the points")
    a1 = re[:, valid[0]]
    coef_scaled = np.concatenate([a1, t @ a1])

    # Undo scaling: substitute u=(x-mx)/s, v=(y-my)/s and expand.
    a, b, c, d, e, f = coef_scaled
    s = scale
    mx, my = mean
    d_s, e_s, f_s = d * s, e * s, f * s * s
    coef = np.array(
        [
            a,
            b,
            c,
            d_s - 2.0 * a * mx - b * my,
            e_s - b * mx - 2.0 * c * my,
            a * mx * mx + b * mx * my + c * my * my - d_s * mx - e_s * my + f_s,
        ]
    )
    return Conic(coef)


def intersect_line_conic(line: Line2, conic: Conic, tol: float = 1e-9) -> list[np.ndarray]:
    """Real intersection points of a line with an ellipse (0, 1 or 2).

    A single point is returned iff the substituted quadratic has a
    discriminant within ``tol`` of zero (tangency).
    """
    p0 = line.point_on()
    t = line.direction
    a_c, b_c, c_c, d_c, e_c, f_c = conic.coefficients
    qa = a_c * t[0] ** 2 + b_c * t[0] * t[1] + c_c * t[1] ** 2
    qb = (
        2.0 * a_c * p0[0] * t[0]
        + b_c * (p0[0] * t[1] + p0[1] * t[0])
        + 2.0 * c_c * p0[1] * t[1]
        + d_c * t[0]
        + e_c * t[1]
    )
    qc = float(conic.evaluate(p0)[0])
    if abs(qa) < 1e-15:
        return []  # cannot happen for an ellipse, guards bad input
    disc = qb * qb - 4.0 * qa * qc
    if disc < -tol:
        return []
    if disc <= tol:
        s = -qb / (2.0 * qa)
        return [p0 + s * t]
    root = np.sqrt(disc)
    return [p0 + ((-qb - root) / (2.0 * qa)) * t, p0 + ((-qb + root) / (2.0 * qa)) * t]


def tangent_points(external: np.ndarray, conic: Conic) -> list[np.ndarray]:
    """Tangency points of the two tangent lines from an external point.

    Uses the pole-polar relation: the polar line of the external point is
    intersected with the conic.  Raises when the point is on or inside.
    """
    p = np.asarray(external, dtype=float)
    # Interior evaluates negative under the canonical coefficient sign.
    if float(conic.evaluate(p)[0]) <= 1e-12:
        raise DegenerateGeometryError("point is not strictly outside the conic")
    polar = conic.matrix @ np.array([p[0], p[1], 1.0])
    line = Line2(polar[0], polar[1], polar[2])
    pts = intersect_line_conic(line, conic)
    if len(pts) != 2:
        if len(pts) == 1:  # numerically grazing: duplicate the tangency
            return [pts[0], pts[0]]
        raise DegenerateGeometryError("polar line misses the conic")
    return pts


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, scale-normalized to a unit largest entry."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        peak = np.max(np.abs(m))
        if peak < 1e-300:
            raise DegenerateGeometryError("zero homography")
        m = m / peak
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateGeometryError("homography is singular")
        object.__setattr__(self, "matrix", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        q = np.column_stack([pts, np.ones(len(pts))]) @ self.matrix.T
        return q[:, :2] / q[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def transform_conic(conic: Conic, h: Homography) -> Conic:
    """Image of a conic under a homography: Q' = H^-T Q H^-1."""
    hinv = np.linalg.inv(h.matrix)
    q = hinv.T @ conic.matrix @ hinv
    return Conic(np.array([q[0, 0], 2.0 * q[0, 1], q[1, 1], 2.0 * q[0, 2], 2.0 * q[1, 2], q[2, 2]]))


def _hartley_normalization(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = pts.mean(axis=0)
    dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    s = np.sqrt(2.0) / dist if dist > 1e-12 else 1.0
    t = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return (pts - centroid) * s, t


def cross2(a: np.ndarray, b: np.ndarray) -> float:
    """z-component of the cross product of two 2D vectors."""
    return float(a[0] * b[1] - a[1] * b[0])


def _any_three_collinear(pts: np.ndarray, eps: float = 1e-9) -> bool:
    n = len(pts)
    span = max(float(np.max(np.ptp(pts, axis=0))), 1.0)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                if abs(cross2(pts[j] - pts[i], pts[k] - pts[i])) < eps * span * span:
                    return True
    return False


def estimate_homography(world: np.ndarray, image: np.ndarray) -> Homography:
    """Normalized-DLT homography from >= 4 world/image correspondences.

    Raises on rank-deficient configurations (e.g. 3 collinear world points
    in a minimal 4-point set).
    """
    wp = np.atleast_2d(np.asarray(world, dtype=float))
    ip = np.atleast_2d(np.asarray(image, dtype=float))
    if wp.shape != ip.shape or wp.shape[0] < 4 or wp.shape[1] != 2:
        raise ValueError("need >= 4 paired 2D correspondences")
    if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(ip))):
        raise ValueError("correspondences must be finite")
    if wp.shape[0] == 4 and _any_three_collinear(wp):
        raise DegenerateGeometryError("3 of 4 world points are collinear")

    wn, tw = _hartley_normalization(wp)
    im, ti = _hartley_normalization(ip)
    n = wp.shape[0]
    a = np.zeros((2 * n, 9))
    a[0::2, 0:2] = wn
    a[0::2, 2] = 1.0
    a[0::2, 6:8] = -im[:, 0:1] * wn
    a[0::2, 8] = -im[:, 0]
    a[1::2, 3:5] = wn
    a[1::2, 5] = 1.0
    a[1::2, 6:8] = -im[:, 1:2] * wn
    a[1::2, 8] = -im[:, 1]

    _, sv, vt = np.linalg.svd(a)
    # A solvable configuration has rank exactly 8 in the 9-dim null space.
    if int(np.sum(sv > 1e-10 * sv[0])) < 8:
        raise DegenerateGeometryError("rank-deficient correspondence configuration")
    hn = vt[-1].reshape(3, 3)
    return Homography(np.linalg.inv(ti) @ hn @ tw)


def ransac_homography_filter(
    world: np.ndarray,
    image: np.ndarray,
    tolerance_px: float = 5.0,
    seed: int = 0,
    max_iterations: int = 500,
    early_exit_ratio: float = 0.9,
) -> tuple[np.ndarray, Homography]:
    """RANSAC over 4-point samples; returns (inlier mask, refit homography).

    Inliers are pairs whose one-way reprojection error is <= tolerance_px.
    Pairs are canonically ordered internally, so the returned inlier set
    does not depend on the input order for a fixed seed.
    """
    wp = np.atleast_2d(np.asarray(world, dtype=float))
    ip = np.atleast_2d(np.asarray(image, dtype=float))
    n = wp.shape[0]
    if n < 4:
        raise ValueError("RANSAC needs at least 4 correspondences")

    canon = np.lexsort((ip[:, 1], ip[:, 0], wp[:, 1], wp[:, 0]))
    wc, ic = wp[canon], ip[canon]
    rng = np.random.default_rng(seed)

    best_mask: np.ndarray | None = None
    best_count = 0
    best_err = np.inf
    for _ in range(max_iterations):
        idx = rng.choice(n, size=4, replace=False)
        try:
            h = estimate_homography(wc[idx], ic[idx])
        except (DegenerateGeometryError, ValueError):
            continue
        err = np.linalg.norm(h.apply(wc) - ic, axis=1)
        mask = err <= tolerance_px
        count = int(mask.sum())
        total = float(np.sum(np.minimum(err, tolerance_px) ** 2))
        if count > best_count or (count == best_count and total < best_err):
            best_mask, best_count, best_err = mask, count, total
            if count >= 4 and count >= early_exit_ratio * n:
                break

    if best_mask is None or best_count < 4:
        raise DegenerateGeometryError("no homography with >= 4 inliers found")

    h_final = estimate_homography(wc[best_mask], ic[best_mask])
    inliers = np.zeros(n, dtype=bool)
    inliers[canon[best_mask]] = True
    return inliers, h_final
