"""Synthetic generator checks: determinism, keypoint exactness, scene geometry."""

import numpy as np
import pytest

from conekpr.camera import default_rig
from conekpr.synth import (
    SceneSpec,
    render_cone_crop,
    render_stereo_scene,
    write_crop_dataset,
)

RIG = default_rig()


class TestConeCrop:
    def test_deterministic(self):
        a = render_cone_crop(seed=7, color="blue")
        b = render_cone_crop(seed=7, color="blue")
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.keypoints, b.keypoints)

    def test_different_seeds_differ(self):
        a = render_cone_crop(seed=7, color="blue")
        b = render_cone_crop(seed=8, color="blue")
        assert not np.array_equal(a.image, b.image)

    def test_keypoints_inside_with_margin(self):
        for i in range(300):
            crop = render_cone_crop(seed=i, color=("blue", "yellow", "orange")[i % 3])
            assert crop.keypoints.min() >= 2.0
            assert crop.keypoints.max() <= 77.0

    def test_keypoint_order_convention(self):
        crop = render_cone_crop(seed=3, color="blue")
        k = crop.keypoints
        assert k[0, 0] < k[1, 0] and k[0, 1] == k[1, 1]  # stripe top: left of right
        assert k[2, 0] < k[3, 0] and k[2, 1] == k[3, 1]  # stripe bottom
        assert k[4, 0] < k[5, 0] and k[4, 1] == k[5, 1]  # base
        assert k[0, 1] < k[2, 1] < k[4, 1]  # top above bottom above base

    def test_stripe_band_brightness_distinguishes_colors(self):
        hits = 0
        n = 1000
        for i in range(n):
            color = ("blue", "yellow")[i % 2]
            crop = render_cone_crop(seed=(2, i), color=color)
            mid = (crop.keypoints[0] + crop.keypoints[1]) / 2.0
            px = crop.image[int(round(mid[1])), int(round(mid[0]))].astype(float) / 255.0
            brightness = px.mean()
            if color == "blue" and brightness > 0.55:
                hits += 1
            elif color == "yellow" and brightness < 0.45:
                hits += 1
        assert hits / n >= 0.99

    def test_invalid_color_rejected(self):
        with pytest.raises(ValueError, match="color"):
            render_cone_crop(seed=0, color="mauve")


class TestStereoScene:
    def test_single_cone_box_disparity(self):
        spec = SceneSpec(cones=[((10.0, 0.0, 0.0), "blue")], noise=0.0, seed=1)
        scene = render_stereo_scene(spec, RIG)
        assert len(scene.cones) == 1
        cone = scene.cones[0]
        expected_d = RIG.intrinsics.fx * RIG.baseline_m / 10.0
        assert cone.disparity == pytest.approx(expected_d, abs=1e-9)
        assert cone.left_box[0] - cone.right_box[0] == pytest.approx(expected_d, abs=1e-9)
        assert cone.left_box[2] - cone.right_box[2] == pytest.approx(expected_d, abs=1e-9)

    def test_empty_spec(self):
        scene = render_stereo_scene(SceneSpec(cones=[], seed=0), RIG)
        assert scene.cones == []

    def test_cone_behind_camera_rejected(self):
        with pytest.raises(ValueError, match="front"):
            SceneSpec(cones=[((-5.0, 0.0, 0.0), "blue")])

    def test_out_of_frame_cone_omitted(self):
        spec = SceneSpec(cones=[((3.0, 50.0, 0.0), "blue")], seed=0)
        scene = render_stereo_scene(spec, RIG)
        assert scene.cones == []
        assert scene.skipped and scene.skipped[0][2] == "outside frame"

    def test_deterministic(self):
        spec = SceneSpec(cones=[((8.0, 1.0, 0.0), "blue"), ((14.0, -2.0, 0.0), "yellow")],
                         seed=9)
        a = render_stereo_scene(spec, RIG)
        b = render_stereo_scene(spec, RIG)
        assert np.array_equal(a.left, b.left)
        assert np.array_equal(a.right, b.right)

    def test_boxes_enclose_keypoints(self):
        spec = SceneSpec(
            cones=[((4.0 + i * 1.5, (-1) ** i * (1.0 + 0.3 * i), 0.0), ("blue", "yellow")[i % 2])
                   for i in range(8)],
            seed=4,
        )
        scene = render_stereo_scene(spec, RIG)
        assert scene.cones
        for cone in scene.cones:
            for kps, box in ((cone.left_keypoints, cone.left_box),
                             (cone.right_keypoints, cone.right_box)):
                assert kps[:, 0].min() >= box[0] and kps[:, 0].max() <= box[2]
                assert kps[:, 1].min() >= box[1] and kps[:, 1].max() <= box[3]

    def test_rendered_keypoints_match_drawn_features(self):
        # render-and-measure oracle: recover silhouette edges per stripe row
        # from the pixels and compare with the projected keypoint x positions
        # two bands, one cone per bearing per band, so nothing occludes and
        # every feature is measurable
        cones = []
        for i, a in enumerate(np.linspace(-0.5, 0.5, 10)):
            z = 3.0 + 0.33 * i
            cones.append(((z, z * np.tan(a), 0.0), ("blue", "yellow")[i % 2]))
        for i, a in enumerate(np.linspace(-0.45, 0.45, 10)):
            z = 8.0 + 0.8 * i
            cones.append(((z, z * np.tan(a), 1.5), ("yellow", "blue")[i % 2]))
        spec = SceneSpec(cones=cones, noise=0.0, seed=11)
        scene = render_stereo_scene(spec, RIG)
        assert len(scene.cones) == 20
        checked = 0
        for cone in scene.cones:
            if cone.occluded:
                continue
            kps = cone.left_keypoints
            for (kp_l, kp_r) in ((kps[0], kps[1]), (kps[2], kps[3])):
                row = int(round(kp_l[1]))
                mid_x = int(round((kp_l[0] + kp_r[0]) / 2.0))
                mid_rgb = scene.left[row, mid_x].astype(int)
                line = scene.left[row]
                same = np.abs(line.astype(int) - mid_rgb).sum(axis=1) < 30
                # walk outward from the midpoint to the run boundaries
                left_edge = mid_x
                while left_edge - 1 >= 0 and same[left_edge - 1]:
                    left_edge -= 1
                right_edge = mid_x
                while right_edge + 1 < same.size and same[right_edge + 1]:
                    right_edge += 1
                assert abs(left_edge - kp_l[0]) <= 1.0
                assert abs(right_edge - kp_r[0]) <= 1.0
                checked += 1
        assert checked == 40  # both stripe rows of all 20 cones


class TestDatasetWriter:
    def test_byte_identical_for_same_seed(self, tmp_path):
        dir_a = tmp_path / "a"
        dir_b = tmp_path / "b"
        ids_a = write_crop_dataset(dir_a, count=12, seed=7)
        ids_b = write_crop_dataset(dir_b, count=12, seed=7)
        assert ids_a == ids_b
        for rel in sorted(p.relative_to(dir_a) for p in dir_a.rglob("*") if p.is_file()):
            assert (dir_a / rel).read_bytes() == (dir_b / rel).read_bytes()

    def test_annotations_parse_and_match_schema(self, tmp_path):
        from conekpr.data import parse_annotation
        ids = write_crop_dataset(tmp_path, count=4, seed=1)
        for image_id in ids:
            doc = (tmp_path / "annotations" / f"{image_id}.json").read_text(encoding="utf-8")
            ann = parse_annotation(doc, image_size=(80, 80))
            assert ann.image_id == image_id
            assert len(ann.keypoints) == 6
