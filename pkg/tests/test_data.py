"""Annotation schema, augmentation algebra, and split determinism checks."""

import json

import numpy as np
import pytest

from conekpr.data import (
    ConeAnnotation,
    KeypointBoundsError,
    KeypointCountError,
    MissingFieldError,
    Rotation,
    build_manifest,
    filter_dataset,
    parse_annotation,
    random_boundary_crop,
    rotate_augment,
    serialize_annotation,
    split_ids,
    to_training_sample,
)
from conekpr.synth import encode_png, render_cone_crop, write_crop_dataset


def valid_doc(**overrides):
    doc = {
        "image_id": "abc123",
        "keypoints": [[20.0, 30.0], [40.0, 30.0], [18.0, 45.0],
                      [42.0, 45.0], [15.0, 70.0], [45.0, 70.0]],
        "color": "blue",
        "rejected": False,
    }
    doc.update(overrides)
    return doc


class TestParseAnnotation:
    def test_valid_document_accepted(self):
        ann = parse_annotation(json.dumps(valid_doc()), image_size=(80, 80))
        assert ann.image_id == "abc123"
        assert len(ann.keypoints) == 6
        assert ann.color == "blue"

    def test_five_keypoints_rejected_with_count_error(self):
        doc = valid_doc()
        doc["keypoints"] = doc["keypoints"][:5]
        with pytest.raises(KeypointCountError) as exc:
            parse_annotation(doc)
        assert exc.value.field == "keypoints"
        assert exc.value.got == 5

    def test_negative_coordinate_bounds_error(self):
        doc = valid_doc()
        doc["keypoints"][0] = [-1.0, 10.0]
        with pytest.raises(KeypointBoundsError) as exc:
            parse_annotation(doc)
        assert exc.value.index == 0

    def test_out_of_image_bounds_error(self):
        doc = valid_doc()
        doc["keypoints"][3] = [81.0, 10.0]
        with pytest.raises(KeypointBoundsError):
            parse_annotation(doc, image_size=(80, 80))
        # without a known image size only non-negativity is enforced
        parse_annotation(doc)

    def test_missing_field_carries_name(self):
        doc = valid_doc()
        del doc["color"]
        with pytest.raises(MissingFieldError) as exc:
            parse_annotation(doc)
        assert exc.value.field == "color"

    def test_rejected_annotation_may_have_fewer_points(self):
        doc = valid_doc(rejected=True, keypoints=[])
        ann = parse_annotation(doc)
        assert ann.rejected

    def test_parse_serialize_identity(self):
        ann = parse_annotation(valid_doc(labeler="me", timestamp="2024-01-01T00:00:00"))
        again = parse_annotation(serialize_annotation(ann))
        assert again == ann
        # and the rendering itself is stable
        assert serialize_annotation(again) == serialize_annotation(ann)


class TestFilterDataset:
    def test_rejected_dropped_with_reason(self):
        anns = [ConeAnnotation("a", [(1, 1)] * 6, "blue", rejected=True)]
        kept, tally = filter_dataset(anns)
        assert kept == []
        assert tally == {"rejected": 1}

    def test_all_valid_passthrough(self):
        anns = [parse_annotation(valid_doc(image_id=f"id{i}")) for i in range(5)]
        kept, tally = filter_dataset(anns)
        assert kept == anns
        assert tally == {}

    def test_mixed_corpus_tally(self):
        good = [parse_annotation(valid_doc(image_id=f"g{i}")) for i in range(7)]
        bad = [
            ConeAnnotation("r1", [(1, 1)] * 6, "blue", rejected=True),
            ConeAnnotation("c1", [(1, 1)] * 5, "blue"),
            ConeAnnotation("b1", [(1, 1)] * 5 + [(200.0, 10.0)], "blue"),
        ]
        kept, tally = filter_dataset(good + bad, image_size=(80, 80))
        assert len(kept) == 7
        assert tally == {"rejected": 1, "count": 1, "bounds": 1}
        assert sum(tally.values()) == 3


class TestRotateAugment:
    def test_rotate_180_formula(self):
        img = np.zeros((80, 80, 3), dtype=np.uint8)
        _, kps = rotate_augment(img, [[10.0, 20.0]], Rotation.ROTATE_180)
        np.testing.assert_allclose(kps[0], [69.0, 59.0])

    def test_rotate_90_formula(self):
        img = np.zeros((80, 80, 3), dtype=np.uint8)
        _, kps = rotate_augment(img, [[10.0, 20.0]], Rotation.ROTATE_90)
        np.testing.assert_allclose(kps[0], [20.0, 69.0])

    def test_four_rotations_identity(self):
        crop = render_cone_crop(seed=1, color="blue")
        img, kps = crop.image, crop.keypoints
        for _ in range(4):
            img, kps = rotate_augment(img, kps, Rotation.ROTATE_90)
        assert np.array_equal(img, crop.image)
        np.testing.assert_allclose(kps, crop.keypoints, atol=1e-12)

    def test_180_equals_90_twice(self):
        crop = render_cone_crop(seed=2, color="yellow")
        img_a, kps_a = rotate_augment(*rotate_augment(crop.image, crop.keypoints,
                                                      Rotation.ROTATE_90),
                                      Rotation.ROTATE_90)
        img_b, kps_b = rotate_augment(crop.image, crop.keypoints, Rotation.ROTATE_180)
        assert np.array_equal(img_a, img_b)
        np.testing.assert_allclose(kps_a, kps_b, atol=1e-12)

    def test_center_fixed_point(self):
        img = np.zeros((80, 80, 3), dtype=np.uint8)
        for rot in Rotation:
            _, kps = rotate_augment(img, [[39.5, 39.5]], rot)
            np.testing.assert_allclose(kps[0], [39.5, 39.5])

    def test_rotation_preserves_pairwise_distances(self):
        crop = render_cone_crop(seed=3, color="blue")
        base = crop.keypoints
        dists = np.linalg.norm(base[:, None] - base[None, :], axis=2)
        for rot in Rotation:
            _, kps = rotate_augment(crop.image, base, rot)
            assert kps.shape == (6, 2)
            got = np.linalg.norm(kps[:, None] - kps[None, :], axis=2)
            np.testing.assert_allclose(got, dists, atol=1e-9)

    def test_non_square_90_rejected(self):
        img = np.zeros((60, 80, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="square"):
            rotate_augment(img, [[1.0, 1.0]], Rotation.ROTATE_90)


class TestBoundaryCrop:
    def test_zero_margins_identity(self):
        crop = render_cone_crop(seed=4, color="blue")
        # find a seed whose sampled margins are all zero by forcing zero slack
        kps = np.array([[1.0, 1.0], [78.0, 1.0], [1.0, 78.0],
                        [78.0, 78.0], [40.0, 40.0], [41.0, 41.0]])
        img, out_kps, applied = random_boundary_crop(crop.image, kps, seed=0)
        assert applied
        assert np.array_equal(img, crop.image)
        np.testing.assert_allclose(out_kps, kps)

    def test_coordinate_map_matches_oracle(self):
        rng = np.random.default_rng(5)
        for trial in range(50):
            crop = render_cone_crop(seed=(6, trial), color="blue")
            img, kps, applied = random_boundary_crop(crop.image, crop.keypoints,
                                                     seed=trial)
            assert applied
            # recover the sampled margins from two known keypoints and verify
            # every keypoint against the direct coordinate map
            src = crop.keypoints
            # solve x' = (x - left) * 80 / (80 - left - right) using kp pair
            # instead: brute-force the integer margins
            found = False
            for left in range(0, 9):
                for right in range(0, 9):
                    sx = 80.0 / (80 - left - right)
                    if not np.allclose((src[:, 0] - left) * sx, kps[:, 0], atol=1e-9):
                        continue
                    for top in range(0, 9):
                        for bottom in range(0, 9):
                            sy = 80.0 / (80 - top - bottom)
                            if np.allclose((src[:, 1] - top) * sy, kps[:, 1], atol=1e-9):
                                found = True
            assert found

    def test_keypoints_stay_in_bounds_1000_seeds(self):
        crop = render_cone_crop(seed=8, color="yellow")
        for seed in range(1000):
            _, kps, _ = random_boundary_crop(crop.image, crop.keypoints, seed=seed)
            assert kps.min() >= 0.0
            assert kps.max() <= 79.0

    def test_tight_keypoint_limits_margin(self):
        img = np.zeros((80, 80, 3), dtype=np.uint8)
        kps = np.array([[2.0, 40.0], [70.0, 40.0], [40.0, 10.0],
                        [40.0, 70.0], [30.0, 30.0], [50.0, 50.0]])
        for seed in range(1000):
            _, out, applied = random_boundary_crop(img, kps, seed=seed)
            assert applied
            # left keypoint at x=2 with 1 px margin: left crop is at most 1
            assert out[0, 0] >= 1.0 - 1e-9

    def test_infeasible_margin_returns_unchanged(self):
        img = np.zeros((80, 80, 3), dtype=np.uint8)
        kps = np.array([[0.5, 40.0]] + [[40.0, 40.0]] * 5)  # 0.5 px from border
        out_img, out_kps, applied = random_boundary_crop(img, kps, seed=1)
        assert not applied
        assert np.array_equal(out_img, img)
        np.testing.assert_allclose(out_kps, kps)


class TestSplit:
    def test_100_items(self):
        splits = split_ids([f"id{i:03d}" for i in range(100)], seed=1)
        assert (len(splits["train"]), len(splits["val"]), len(splits["test"])) == (70, 20, 10)

    def test_101_items_floor_floor_remainder(self):
        splits = split_ids([f"id{i:03d}" for i in range(101)], seed=1)
        assert (len(splits["train"]), len(splits["val"]), len(splits["test"])) == (70, 20, 11)

    def test_deterministic_and_order_independent(self):
        ids = [f"im{i}" for i in range(40)]
        a = split_ids(ids, seed=9)
        b = split_ids(list(reversed(ids)), seed=9)
        assert a == b
        c = split_ids(ids, seed=10)
        assert a != c

    def test_partition_is_disjoint_and_exhaustive(self):
        ids = [f"x{i}" for i in range(53)]
        splits = split_ids(ids, seed=3)
        merged = splits["train"] + splits["val"] + splits["test"]
        assert sorted(merged) == sorted(ids)
        assert len(set(merged)) == len(ids)

    def test_too_few_items_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            split_ids(["a"] * 9, seed=0)


class TestTrainingSample:
    def test_resize_rescales_keypoints(self):
        big = np.zeros((160, 160, 3), dtype=np.uint8)
        png = encode_png(big)
        ann = ConeAnnotation("big", [(80.0, 80.0)] * 6, "blue")
        tensor, kps, heatmaps = to_training_sample(ann, png, out_size=80)
        assert tensor.shape == (3, 80, 80)
        np.testing.assert_allclose(kps, 40.0)
        assert heatmaps.shape == (6, 80, 80)

    def test_values_in_unit_range(self):
        crop = render_cone_crop(seed=9, color="blue")
        ann = ConeAnnotation("c", [tuple(p) for p in crop.keypoints], "blue")
        tensor, _, _ = to_training_sample(ann, encode_png(crop.image))
        assert tensor.min() >= 0.0
        assert tensor.max() <= 1.0

    def test_undecodable_image_rejected(self):
        ann = ConeAnnotation("c", [(1.0, 1.0)] * 6, "blue")
        with pytest.raises(ValueError, match="decode"):
            to_training_sample(ann, b"not a png")

    def test_keypoints_track_features_through_resize(self):
        # render at 80, upscale to 160, feed through the 80x80 pipeline and
        # verify the mapped stripe-top midpoint still samples stripe pixels
        from PIL import Image
        import io
        crop = render_cone_crop(seed=10, color="yellow", noise=0.0)
        big = np.asarray(Image.fromarray(crop.image).resize((160, 160), Image.NEAREST))
        ann = ConeAnnotation("c", [(2 * x, 2 * y) for x, y in crop.keypoints], "yellow")
        tensor, kps, _ = to_training_sample(ann, encode_png(big), out_size=80)
        mid = (kps[0] + kps[1]) / 2.0
        rgb = tensor[:, int(round(mid[1])) + 1, int(round(mid[0]))]
        assert rgb.mean() < 0.4  # yellow cone stripe band is dark


class TestManifest:
    def test_build_manifest_splits_and_augments(self, tmp_path):
        write_crop_dataset(tmp_path, count=20, seed=3)
        manifest = build_manifest(tmp_path, seed=5, augment=True)
        assert len(manifest.items) == 80
        by_source = {}
        for item in manifest.items:
            by_source.setdefault(item.source_id, set()).add(item.split)
        # augmented variants share their source's split
        assert all(len(s) == 1 for s in by_source.values())
        n = {s: len([i for i in manifest.items if i.split == s and i.augmentation == "NONE"])
             for s in ("train", "val", "test")}
        assert (n["train"], n["val"], n["test"]) == (14, 4, 2)

    def test_manifest_roundtrip(self, tmp_path):
        write_crop_dataset(tmp_path / "data", count=12, seed=3)
        manifest = build_manifest(tmp_path / "data", seed=5)
        path = tmp_path / "manifest.json"
        manifest.save(path)
        from conekpr.data import DatasetManifest
        again = DatasetManifest.load(path)
        assert again == manifest
