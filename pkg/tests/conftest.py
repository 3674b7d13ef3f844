import numpy as np
import pytest

from pitchcal.camera import CameraParams, project_points, rotation_looking_at
from pitchcal.derive import Keypoint, KeypointSet
from pitchcal.pitch import default_template


@pytest.fixture(scope="session")
def template():
    return default_template()


def make_camera(position, target, focal, image_size=(960, 540)) -> CameraParams:
    return CameraParams(
        focal,
        rotation_looking_at(np.asarray(position, float), np.asarray(target, float)),
        np.asarray(position, float),
        image_size,
    )


def visible_keypoint_projections(params: CameraParams, template) -> dict[int, np.ndarray]:
    """id -> exact pixel position for keypoints visible in the frame."""
    worlds = template.keypoint_world_array()
    uv, in_front = project_points(params, worlds)
    w, h = params.image_size
    out = {}
    for i in range(len(worlds)):
        if in_front[i] and 0 <= uv[i, 0] <= w and 0 <= uv[i, 1] <= h:
            out[i] = uv[i].copy()
    return out


def keypoint_set_from_projections(projections: dict[int, np.ndarray], confidence=1.0) -> KeypointSet:
    return KeypointSet(
        [Keypoint(i, pos, confidence, "detector") for i, pos in sorted(projections.items())]
    )


@pytest.fixture
def broadcast_camera():
    # Elevated side-of-pitch view covering the left half with the centre
    # circle, penalty box and goal frame all in frame.
    return make_camera((10.0, -55.0, 25.0), (-20.0, 0.0, 0.0), 700.0)


@pytest.fixture
def top_down_camera():
    # Straight-down full-pitch view; rotation maps world z to -camera z.
    rot = np.diag([1.0, -1.0, -1.0])
    return CameraParams(450.0, rot, np.array([0.0, 0.0, 80.0]), (960, 540))
