"""SVG rendering of projected pitch markings over a frame."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .camera import CameraParams, project_points
from .metrics import project_markings
from .pitch import EXTRA, LINE_CONIC, LINE_LINE, TANGENT, PitchTemplate

FAMILY_COLORS = {
    LINE_LINE: "red",
    LINE_CONIC: "blue",
    TANGENT: "purple",
    EXTRA: "black",
}
LINE_COLOR = "#e8e8e8"


def render_overlay(
    params: CameraParams,
    template: PitchTemplate,
    image_size: tuple[int, int],
    background: str | None = None,
    sample_step_m: float = 0.25,
) -> str:
    """SVG document with the projected markings and keypoint markers.

    Keypoints are coloured by family (line-line red, line-conic blue,
    tangent purple, extra black).  ``background`` optionally references
    an image placed behind the overlay.
    """
    w, h = image_size
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
        f'version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
    ]
    if background:
        parts.append(
            f'  <image xlink:href="{escape(background)}" x="0" y="0" width="{w}" height="{h}"/>'
        )
    for name, runs in project_markings(params, template, image_size, sample_step_m).items():
        for run in runs:
            coords = " ".join(f"{p[0]:.2f},{p[1]:.2f}" for p in run)
            parts.append(
                f'  <polyline fill="none" stroke="{LINE_COLOR}" stroke-width="2" '
                f'points="{coords}"><title>{escape(name)}</title></polyline>'
            )
    worlds = template.keypoint_world_array()
    uv, in_front = project_points(params, worlds)
    for kp_def in template.keypoints:
        u, v = uv[kp_def.id]
        if not in_front[kp_def.id] or not (0 <= u <= w and 0 <= v <= h):
            continue
        color = FAMILY_COLORS[kp_def.family]
        parts.append(
            f'  <circle cx="{u:.2f}" cy="{v:.2f}" r="4" fill="{color}">'
            f"<title>{kp_def.id}: {escape(kp_def.name)}</title></circle>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
