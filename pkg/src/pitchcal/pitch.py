"""Canonical world-space pitch template.

World frame: origin at pitch centre, x along the long axis (left goal at
x = -length/2), y along the short axis ("Side line top" at y = -width/2),
z up.  The ground plane is z = 0; goal frames rise to the crossbar height
in the two vertical goal planes.

The template carries 23 line-segment marking classes, 3 conic classes and
57 structural keypoint definitions split into four families:

* ``line_line`` (30): intersections of two marking lines,
* ``line_conic`` (6): intersections of a conic with a line,
* ``tangent`` (8): tangency points of lines from a marked intersection
  to a conic,
* ``extra`` (13): longitudinal-axis points and central-circle quarter
  turns, placed by homography projection rather than direct fitting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

LINE_LINE = "line_line"
LINE_CONIC = "line_conic"
TANGENT = "tangent"
EXTRA = "extra"
FAMILIES = (LINE_LINE, LINE_CONIC, TANGENT, EXTRA)

GROUND = "ground"
GOAL_LEFT = "goal_left"
GOAL_RIGHT = "goal_right"

NUM_KEYPOINTS = 57


@dataclass(frozen=True)
class MarkingClass:
    """One marking of the pitch pattern: a segment or a conic (arc)."""

    name: str
    kind: str  # 'line_segment' | 'circle' | 'arc'
    plane: str  # 'ground' | 'goal_left' | 'goal_right'
    p0: np.ndarray | None = None
    p1: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    angle_start: float | None = None
    angle_end: float | None = None

    @property
    def is_conic(self) -> bool:
        return self.kind in ("circle", "arc")

    def point_at_angle(self, theta: float | np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        t = np.atleast_1d(theta)
        pts = np.column_stack(
            [
                c[0] + self.radius * np.cos(t),
                c[1] + self.radius * np.sin(t),
                np.full(len(t), c[2]),
            ]
        )
        return pts


@dataclass(frozen=True)
class KeypointDef:
    """One of the 57 structural keypoints."""

    id: int
    name: str
    family: str
    world: np.ndarray
    classes: tuple[str, ...] = ()  # defining marking classes
    anchor_id: int | None = None  # external point for tangent keypoints
    mirror_id: int = -1  # partner under x -> -x (may be self)


def _seg(name: str, p0, p1, plane: str = GROUND) -> MarkingClass:
    return MarkingClass(
        name=name,
        kind="line_segment",
        plane=plane,
        p0=np.array(p0, dtype=float),
        p1=np.array(p1, dtype=float),
    )


@dataclass(frozen=True)
class PitchTemplate:
    """Pitch dimensions plus the derived marking and keypoint catalogs."""

    length: float = 105.0
    width: float = 68.0
    goal_width: float = 7.32
    crossbar_height: float = 2.44
    penalty_area_length: float = 16.5
    penalty_area_width: float = 40.32
    goal_area_length: float = 5.5
    goal_area_width: float = 18.32
    circle_radius: float = 9.15
    penalty_spot_distance: float = 11.0

    markings: dict[str, MarkingClass] = field(init=False, repr=False)
    keypoints: tuple[KeypointDef, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._validate()
        object.__setattr__(self, "markings", self._build_markings())
        object.__setattr__(self, "keypoints", self._build_keypoints())

    def _validate(self) -> None:
        for f in fields(self):
            if f.init and getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")
        if not (
            self.penalty_area_length > self.goal_area_length
            and self.penalty_area_width > self.goal_area_width
        ):
            raise ValueError("penalty area must strictly contain the goal area")
        if self.circle_radius >= self.width / 2:
            raise ValueError("circle radius must be below half the pitch width")
        if not (0 < self.penalty_area_length - self.penalty_spot_distance < self.circle_radius):
            raise ValueError("penalty arc does not protrude beyond the penalty area")

    # -- marking catalog ------------------------------------------------

    def _build_markings(self) -> dict[str, MarkingClass]:
        hl, hw = self.length / 2, self.width / 2
        paw, pal = self.penalty_area_width / 2, self.penalty_area_length
        gaw, gal = self.goal_area_width / 2, self.goal_area_length
        gw, cb = self.goal_width / 2, self.crossbar_height
        r = self.circle_radius
        spot = hl - self.penalty_spot_distance

        m: list[MarkingClass] = [
            _seg("Side line top", (-hl, -hw, 0), (hl, -hw, 0)),
            _seg("Side line bottom", (-hl, hw, 0), (hl, hw, 0)),
            _seg("Side line left", (-hl, -hw, 0), (-hl, hw, 0)),
            _seg("Side line right", (hl, -hw, 0), (hl, hw, 0)),
            _seg("Middle line", (0, -hw, 0), (0, hw, 0)),
        ]
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            gx = sgn * hl  # goal line
            fx = sgn * (hl - pal)  # penalty area front
            m += [
                _seg(f"Big rect. {side} top", (gx, -paw, 0), (fx, -paw, 0)),
                _seg(f"Big rect. {side} main", (fx, -paw, 0), (fx, paw, 0)),
                _seg(f"Big rect. {side} bottom", (gx, paw, 0), (fx, paw, 0)),
            ]
            gx2 = sgn * (hl - gal)
            m += [
                _seg(f"Small rect. {side} top", (gx, -gaw, 0), (gx2, -gaw, 0)),
                _seg(f"Small rect. {side} main", (gx2, -gaw, 0), (gx2, gaw, 0)),
                _seg(f"Small rect. {side} bottom", (gx, gaw, 0), (gx2, gaw, 0)),
            ]
            plane = GOAL_LEFT if side == "left" else GOAL_RIGHT
            # "post left"/"post right" follow the established broadcast
            # naming: the left goal's left post is on the +y side, the
            # right goal's left post on the -y side.
            yl = gw if side == "left" else -gw
            m += [
                _seg(f"Goal {side} post left", (gx, yl, 0), (gx, yl, cb), plane),
                _seg(f"Goal {side} post right", (gx, -yl, 0), (gx, -yl, cb), plane),
                _seg(f"Goal {side} crossbar", (gx, -gw, cb), (gx, gw, cb), plane),
            ]

        theta = math.acos((pal - self.penalty_spot_distance) / r)
        conics = [
            MarkingClass(
                name="Circle central",
                kind="circle",
                plane=GROUND,
                center=np.zeros(3),
                radius=r,
                angle_start=0.0,
                angle_end=2 * math.pi,
            ),
            MarkingClass(
                name="Circle left",
                kind="arc",
                plane=GROUND,
                center=np.array([-spot, 0.0, 0.0]),
                radius=r,
                angle_start=-theta,
                angle_end=theta,
            ),
            MarkingClass(
                name="Circle right",
                kind="arc",
                plane=GROUND,
                center=np.array([spot, 0.0, 0.0]),
                radius=r,
                angle_start=math.pi - theta,
                angle_end=math.pi + theta,
            ),
        ]
        return {mk.name: mk for mk in m + conics}

    # -- keypoint catalog -----------------------------------------------

    def _build_keypoints(self) -> tuple[KeypointDef, ...]:
        hl, hw = self.length / 2, self.width / 2
        paw, pal = self.penalty_area_width / 2, self.penalty_area_length
        gaw, gal = self.goal_area_width / 2, self.goal_area_length
        gw, cb = self.goal_width / 2, self.crossbar_height
        r = self.circle_radius
        spot = hl - self.penalty_spot_distance

        defs: list[KeypointDef] = []

        def add(name, family, world, classes=(), anchor_id=None):
            defs.append(
                KeypointDef(
                    id=len(defs),
                    name=name,
                    family=family,
                    world=np.array(world, dtype=float),
                    classes=tuple(classes),
                    anchor_id=anchor_id,
                )
            )
            return defs[-1].id

        def cross(a, b, world):
            return add(f"{a} x {b}", LINE_LINE, world, (a, b))

        # 30 line-line intersections
        cross("Side line top", "Side line left", (-hl, -hw, 0))
        cross("Side line top", "Side line right", (hl, -hw, 0))
        cross("Side line bottom", "Side line left", (-hl, hw, 0))
        cross("Side line bottom", "Side line right", (hl, hw, 0))
        top_anchor = cross("Middle line", "Side line top", (0, -hw, 0))
        bottom_anchor = cross("Middle line", "Side line bottom", (0, hw, 0))

        arc_anchors: dict[str, tuple[int, int]] = {}
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            goal_line = f"Side line {side}"
            gx, fx = sgn * hl, sgn * (hl - pal)
            cross(f"Big rect. {side} top", goal_line, (gx, -paw, 0))
            a_top = cross(f"Big rect. {side} top", f"Big rect. {side} main", (fx, -paw, 0))
            a_bot = cross(f"Big rect. {side} bottom", f"Big rect. {side} main", (fx, paw, 0))
            cross(f"Big rect. {side} bottom", goal_line, (gx, paw, 0))
            arc_anchors[side] = (a_top, a_bot)
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            goal_line = f"Side line {side}"
            gx, gx2 = sgn * hl, sgn * (hl - gal)
            cross(f"Small rect. {side} top", goal_line, (gx, -gaw, 0))
            cross(f"Small rect. {side} top", f"Small rect. {side} main", (gx2, -gaw, 0))
            cross(f"Small rect. {side} bottom", f"Small rect. {side} main", (gx2, gaw, 0))
            cross(f"Small rect. {side} bottom", goal_line, (gx, gaw, 0))
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            gx = sgn * hl
            yl = gw if side == "left" else -gw
            for post, y in ((f"Goal {side} post left", yl), (f"Goal {side} post right", -yl)):
                cross(post, f"Side line {side}", (gx, y, 0))
                cross(post, f"Goal {side} crossbar", (gx, y, cb))

        # 6 line-conic intersections
        def conic_cross(conic, line, world, tag):
            return add(f"{conic} x {line} {tag}", LINE_CONIC, world, (conic, line))

        conic_cross("Circle central", "Middle line", (0, -r, 0), "top")
        conic_cross("Circle central", "Middle line", (0, r, 0), "bottom")
        ya = math.sqrt(r * r - (pal - self.penalty_spot_distance) ** 2)
        conic_cross("Circle left", "Big rect. left main", (-hl + pal, -ya, 0), "top")
        conic_cross("Circle left", "Big rect. left main", (-hl + pal, ya, 0), "bottom")
        conic_cross("Circle right", "Big rect. right main", (hl - pal, -ya, 0), "top")
        conic_cross("Circle right", "Big rect. right main", (hl - pal, ya, 0), "bottom")

        # 8 tangent points: central circle from the two halfway/touchline
        # intersections, penalty arcs from the penalty-area front corners
        # (keeping the solution on the marked arc).
        yt = r * r / hw
        xt = math.sqrt(r * r - yt * yt)
        for tag, anchor, sy in (("top", top_anchor, -1.0), ("bottom", bottom_anchor, 1.0)):
            add(
                f"Circle central tangent {tag} left",
                TANGENT,
                (-xt, sy * yt, 0),
                ("Circle central",),
                anchor_id=anchor,
            )
            add(
                f"Circle central tangent {tag} right",
                TANGENT,
                (xt, sy * yt, 0),
                ("Circle central",),
                anchor_id=anchor,
            )
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            a_top, a_bot = arc_anchors[side]
            cx = sgn * spot
            for tag, anchor, corner_y in (("top", a_top, -paw), ("bottom", a_bot, paw)):
                px, py = sgn * (hl - pal) - cx, corner_y
                world = _circle_tangent_on_arc(px, py, r, cx)
                add(
                    f"Circle {side} tangent {tag}",
                    TANGENT,
                    world,
                    (f"Circle {side}",),
                    anchor_id=anchor,
                )

        # 13 extra points: nine along the longitudinal axis, four
        # quarter turns on the central circle.
        add("Goal line left x axis", EXTRA, (-hl, 0, 0))
        add("Goal area left x axis", EXTRA, (-hl + gal, 0, 0))
        add("Penalty area left x axis", EXTRA, (-hl + pal, 0, 0))
        add("Penalty spot left", EXTRA, (-spot, 0, 0))
        add("Pitch center", EXTRA, (0, 0, 0))
        add("Penalty spot right", EXTRA, (spot, 0, 0))
        add("Penalty area right x axis", EXTRA, (hl - pal, 0, 0))
        add("Goal area right x axis", EXTRA, (hl - gal, 0, 0))
        add("Goal line right x axis", EXTRA, (hl, 0, 0))
        q = r / math.sqrt(2.0)
        add("Circle central quarter top right", EXTRA, (q, -q, 0))
        add("Circle central quarter top left", EXTRA, (-q, -q, 0))
        add("Circle central quarter bottom left", EXTRA, (-q, q, 0))
        add("Circle central quarter bottom right", EXTRA, (q, q, 0))

        if len(defs) != NUM_KEYPOINTS:
            raise AssertionError(f"expected {NUM_KEYPOINTS} keypoints, built {len(defs)}")
        return tuple(_assign_mirrors(defs))

    # -- accessors ------------------------------------------------------

    @property
    def line_class_names(self) -> list[str]:
        return [m.name for m in self.markings.values() if not m.is_conic]

    @property
    def conic_class_names(self) -> list[str]:
        return [m.name for m in self.markings.values() if m.is_conic]

    def keypoint(self, keypoint_id: int) -> KeypointDef:
        if not 0 <= keypoint_id < NUM_KEYPOINTS:
            raise KeyError(f"unknown keypoint id {keypoint_id}")
        return self.keypoints[keypoint_id]

    def keypoints_of_family(self, family: str) -> list[KeypointDef]:
        return [k for k in self.keypoints if k.family == family]

    def keypoint_world_array(self) -> np.ndarray:
        """(57, 3) array of keypoint world positions, indexed by id."""
        return np.stack([k.world for k in self.keypoints])

    @classmethod
    def from_dict(cls, data: dict) -> "PitchTemplate":
        known = {f.name for f in fields(cls) if f.init}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown template fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @classmethod
    def from_file(cls, path: str | Path) -> "PitchTemplate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _circle_tangent_on_arc(px: float, py: float, r: float, cx: float) -> tuple:
    """Tangent point from (px, py) (circle-centered coords) lying on the
    arc around angle 0 (left arc) or pi (right arc); cx restores world x."""
    d2 = px * px + py * py
    root = math.sqrt(d2 - r * r)
    # Tangent points of the circle x^2+y^2=r^2 from (px, py).
    tx1 = (r * r * px - r * py * root) / d2
    ty1 = (r * r * py + r * px * root) / d2
    tx2 = (r * r * px + r * py * root) / d2
    ty2 = (r * r * py - r * px * root) / d2
    # The marked arc bulges away from the penalty area: along -cx sign.
    pick = (tx1, ty1) if tx1 * np.sign(-cx) > tx2 * np.sign(-cx) else (tx2, ty2)
    return (cx + pick[0], pick[1], 0.0)


def _assign_mirrors(defs: list[KeypointDef]) -> list[KeypointDef]:
    out: list[KeypointDef] = []
    worlds = np.stack([d.world for d in defs])
    for d in defs:
        target = d.world * np.array([-1.0, 1.0, 1.0])
        dists = np.linalg.norm(worlds - target, axis=1)
        same_family = np.array([o.family == d.family for o in defs])
        dists[~same_family] = np.inf
        j = int(np.argmin(dists))
        if dists[j] > 1e-9:
            raise AssertionError(f"no mirror partner for keypoint {d.id} ({d.name})")
        out.append(
            KeypointDef(
                id=d.id,
                name=d.name,
                family=d.family,
                world=d.world,
                classes=d.classes,
                anchor_id=d.anchor_id,
                mirror_id=j,
            )
        )
    return out


def default_template() -> PitchTemplate:
    """The FIFA-standard 105 x 68 m template with all catalogs populated."""
    return PitchTemplate()


def sample_marking(template: PitchTemplate, marking: MarkingClass | str, step: float) -> np.ndarray:
    """Ordered 3D points along a marking with spacing <= step (m).

    Segment endpoints are always included; conic samples are ordered by
    angle over the class's angular range (a full circle repeats the start
    point at the end, closing the polyline).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if isinstance(marking, str):
        marking = template.markings[marking]
    if not marking.is_conic:
        length = float(np.linalg.norm(marking.p1 - marking.p0))
        n = max(1, math.ceil(length / step))
        t = np.linspace(0.0, 1.0, n + 1)
        return marking.p0 + t[:, None] * (marking.p1 - marking.p0)
    span = marking.angle_end - marking.angle_start
    arc_len = abs(span) * marking.radius
    n = max(3, math.ceil(arc_len / step))
    theta = np.linspace(marking.angle_start, marking.angle_end, n + 1)
    return marking.point_at_angle(theta)


def keypoint_world(template: PitchTemplate, keypoint_id: int) -> np.ndarray:
    """World coordinates (x, y, z) of a keypoint definition."""
    return template.keypoint(keypoint_id).world.copy()
