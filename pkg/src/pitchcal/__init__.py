"""Football-pitch keypoint derivation, camera calibration and evaluation.

The pipeline turns per-class pitch-marking observations into structural
keypoints, estimates pinhole broadcast-camera parameters by voting over
keypoint subsets, and scores calibrations with the polyline-matching
Acc@t / completeness / Score metrics.  A synthetic camera oracle closes
the loop for testing.
"""

from .camera import (
    CalibrationError,
    CameraParams,
    Correspondence,
    PlausibilityBounds,
    RefineResult,
    calibrate_multiplane,
    calibrate_planar,
    camera_from_dict,
    camera_to_dict,
    is_plausible,
    project,
    project_points,
    refine_lm,
    reprojection_rmse,
)
from .derive import (
    Annotation,
    Keypoint,
    KeypointSet,
    LineObservation,
    derive_extra,
    derive_keypoints,
    derive_line_conic,
    derive_line_line,
    derive_tangent,
    remap_left_right,
)
from .geometry import (
    Conic,
    DegenerateGeometryError,
    Homography,
    Line2,
    estimate_homography,
    fit_ellipse,
    fit_line,
    intersect_line_conic,
    ransac_homography_filter,
    refine_intersection,
    tangent_points,
)
from .metrics import EvalReport, acc_at_t, l2_keypoints, project_markings, score, segment_confusion
from .overlay import render_overlay
from .pitch import (
    KeypointDef,
    MarkingClass,
    PitchTemplate,
    default_template,
    keypoint_world,
    sample_marking,
)
from .synth import SyntheticScenario, render_annotation, render_detections, sample_camera
from .voter import CalibrationOutcome, VoterConfig, calibrate_frame, fuse_lines, iterative_vote, vote

__version__ = "0.1.0"
