import json

import numpy as np
import pytest

from pitchcal.pitch import (
    EXTRA,
    LINE_CONIC,
    LINE_LINE,
    TANGENT,
    PitchTemplate,
    default_template,
    keypoint_world,
    sample_marking,
)


class TestCatalogCounts:
    def test_57_keypoint_definitions(self, template):
        assert len(template.keypoints) == 57

    def test_23_line_classes_and_3_conics(self, template):
        assert len(template.line_class_names) == 23
        assert sorted(template.conic_class_names) == [
            "Circle central",
            "Circle left",
            "Circle right",
        ]

    def test_family_partition(self, template):
        counts = {}
        for kp in template.keypoints:
            counts[kp.family] = counts.get(kp.family, 0) + 1
        assert counts == {LINE_LINE: 30, LINE_CONIC: 6, TANGENT: 8, EXTRA: 13}

    def test_pitch_center_at_origin(self, template):
        center = [k for k in template.keypoints if k.name == "Pitch center"]
        assert len(center) == 1
        assert np.allclose(center[0].world, 0.0)


class TestKeypointWorld:
    def test_penalty_spot_left(self, template):
        spot = [k for k in template.keypoints if k.name == "Penalty spot left"][0]
        assert np.allclose(keypoint_world(template, spot.id), [-41.5, 0.0, 0.0])

    def test_circle_halfway_intersection(self, template):
        top = [k for k in template.keypoints if k.family == LINE_CONIC and k.world[1] < 0
               and "central" in k.name][0]
        assert np.allclose(top.world, [0.0, -9.15, 0.0])

    def test_crossbar_corner_height(self, template):
        corners = [k for k in template.keypoints if "crossbar" in k.name and k.world[0] < 0]
        assert corners and all(abs(k.world[2] - 2.44) < 1e-12 for k in corners)

    def test_unknown_id_rejected(self, template):
        with pytest.raises(KeyError):
            template.keypoint(57)
        with pytest.raises(KeyError):
            template.keypoint(-1)


class TestMirrorSymmetry:
    def test_mirror_pairs_flip_x(self, template):
        for kp in template.keypoints:
            partner = template.keypoint(kp.mirror_id)
            assert partner.mirror_id == kp.id
            assert partner.family == kp.family
            np.testing.assert_allclose(
                partner.world, kp.world * np.array([-1.0, 1.0, 1.0]), atol=1e-9
            )

    def test_template_marking_symmetry(self, template):
        # Every segment endpoint has a counterpart under x -> -x and y -> -y.
        pts = []
        for m in template.markings.values():
            if not m.is_conic:
                pts += [m.p0, m.p1]
        pts = np.array(pts)
        for flip in (np.array([-1, 1, 1]), np.array([1, -1, 1])):
            mirrored = pts * flip
            for p in mirrored:
                assert np.min(np.linalg.norm(pts - p, axis=1)) < 1e-9


class TestMembership:
    def test_line_line_points_on_both_lines(self, template):
        for kp in template.keypoints:
            if kp.family != LINE_LINE:
                continue
            for cls in kp.classes:
                m = template.markings[cls]
                d = m.p1 - m.p0
                v = kp.world - m.p0
                residual = np.linalg.norm(np.cross(d / np.linalg.norm(d), v))
                assert residual < 1e-9, (kp.name, cls)

    def test_line_conic_points_on_both(self, template):
        for kp in template.keypoints:
            if kp.family != LINE_CONIC:
                continue
            conic = template.markings[kp.classes[0]]
            assert abs(np.linalg.norm(kp.world[:2] - conic.center[:2]) - conic.radius) < 1e-9
            line = template.markings[kp.classes[1]]
            d = line.p1 - line.p0
            residual = np.linalg.norm(np.cross(d / np.linalg.norm(d), kp.world - line.p0))
            assert residual < 1e-9

    def test_tangent_points_on_conic_and_tangent_line(self, template):
        for kp in template.keypoints:
            if kp.family != TANGENT:
                continue
            conic = template.markings[kp.classes[0]]
            center = conic.center[:2]
            t = kp.world[:2] - center
            assert abs(np.linalg.norm(t) - conic.radius) < 1e-9
            anchor = template.keypoint(kp.anchor_id).world[:2]
            # Radius is perpendicular to the anchor-to-tangent-point chord.
            assert abs(np.dot(t, kp.world[:2] - anchor)) < 1e-9

    def test_arc_tangents_on_marked_arc(self, template):
        for kp in template.keypoints:
            if kp.family != TANGENT or "central" in kp.classes[0]:
                continue
            arc = template.markings[kp.classes[0]]
            ang = np.arctan2(kp.world[1] - arc.center[1], kp.world[0] - arc.center[0])
            span = [arc.angle_start, arc.angle_end]
            ang = ang % (2 * np.pi)
            lo, hi = span[0] % (2 * np.pi), span[1] % (2 * np.pi)
            inside = lo <= ang <= hi if lo <= hi else (ang >= lo or ang <= hi)
            assert inside, kp.name


class TestSampleMarking:
    def test_halfway_line_step_34(self, template):
        pts = sample_marking(template, "Middle line", 34.0)
        np.testing.assert_allclose(pts, [[0, -34, 0], [0, 0, 0], [0, 34, 0]], atol=1e-12)

    def test_circle_large_step(self, template):
        pts = sample_marking(template, "Circle central", 1000.0)
        assert len(pts) >= 4
        np.testing.assert_allclose(np.linalg.norm(pts[:, :2], axis=1), 9.15, atol=1e-12)

    def test_spacing_bound(self, template):
        for name in ("Side line top", "Big rect. left main", "Circle left"):
            pts = sample_marking(template, name, 0.5)
            gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            assert np.all(gaps <= 0.5 + 1e-9), name

    def test_endpoints_included(self, template):
        m = template.markings["Goal left crossbar"]
        pts = sample_marking(template, m, 0.7)
        np.testing.assert_allclose(pts[0], m.p0, atol=1e-12)
        np.testing.assert_allclose(pts[-1], m.p1, atol=1e-12)

    def test_step_must_be_positive(self, template):
        with pytest.raises(ValueError):
            sample_marking(template, "Middle line", 0.0)


class TestTemplateConfig:
    def test_default_dimensions(self, template):
        assert template.length == 105.0 and template.width == 68.0
        assert template.goal_width == 7.32 and template.crossbar_height == 2.44
        assert template.circle_radius == 9.15

    def test_from_dict_partial_override(self):
        t = PitchTemplate.from_dict({"length": 100.0, "width": 64.0})
        assert t.length == 100.0 and t.width == 64.0
        assert t.circle_radius == 9.15
        assert len(t.keypoints) == 57

    def test_from_file(self, tmp_path):
        path = tmp_path / "template.json"
        path.write_text(json.dumps({"length": 110.0}))
        assert PitchTemplate.from_file(path).length == 110.0

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            PitchTemplate.from_dict({"lenght": 105.0})

    def test_invalid_dimensions_rejected(self):
        with pytest.raises(ValueError):
            PitchTemplate(length=-105.0)
        with pytest.raises(ValueError):
            PitchTemplate(circle_radius=40.0)
        with pytest.raises(ValueError):
            PitchTemplate(goal_area_length=20.0)  # exceeds penalty area

    def test_goal_plane_markings(self, template):
        for name, m in template.markings.items():
            if m.plane == "ground":
                if not m.is_conic:
                    assert abs(m.p0[2]) < 1e-12 and abs(m.p1[2]) < 1e-12, name
            else:
                zs = (m.p0[2], m.p1[2])
                assert max(zs) <= template.crossbar_height + 1e-12, name

    def test_construction_is_deterministic(self):
        a, b = default_template(), default_template()
        np.testing.assert_array_equal(a.keypoint_world_array(), b.keypoint_world_array())
