import numpy as np
import pytest
from scipy import ndimage

from cervixseg.errors import ConfigError
from cervixseg.inpaint import telea_inpaint
from cervixseg.metrics import iou
from cervixseg.phantom import PhantomSpec, Sample, generate_sample
from cervixseg.pngio import save_gray_png
from cervixseg.preprocess import (
    AugmentationPolicy,
    MarkerConfig,
    augment,
    balance_and_augment,
    detect_markers,
    prepare_image,
    split_by_patient,
)


def paint_cross(image, cy, cx, color, arm=5, thickness=1):
    painted = np.zeros(image.shape[:2], dtype=bool)
    h, w = image.shape[:2]
    for dy in range(-arm, arm + 1):
        for dt in range(-thickness, thickness + 1):
            y, x = cy + dy, cx + dt
            if 0 <= y < h and 0 <= x < w:
                image[y, x] = color
                painted[y, x] = True
            y, x = cy + dt, cx + dy
            if 0 <= y < h and 0 <= x < w:
                image[y, x] = color
                painted[y, x] = True
    return painted


class TestDetectMarkers:
    def test_pure_gray_image_has_empty_mask(self):
        rgb = np.repeat(np.random.default_rng(0).random((32, 32))[..., None], 3, axis=-1)
        assert detect_markers(rgb).sum() == 0

    def test_grayscale_input_returns_empty_mask(self):
        gray = np.random.default_rng(0).random((32, 32))
        assert detect_markers(gray).sum() == 0

    def test_yellow_cross_covered(self):
        rng = np.random.default_rng(1)
        rgb = np.repeat(rng.random((64, 64))[..., None] * 0.5, 3, axis=-1)
        painted = paint_cross(rgb, 30, 30, color=(1.0, 0.9, 0.1))
        mask = detect_markers(rgb).astype(bool)
        assert (mask & painted).sum() / painted.sum() >= 0.95

    def test_green_cross_at_border_clipped(self):
        rgb = np.full((64, 64, 3), 0.4)
        painted = paint_cross(rgb, 1, 1, color=(0.1, 0.9, 0.1))
        mask = detect_markers(rgb)
        assert mask.shape == (64, 64)
        assert (mask.astype(bool) & painted).sum() / painted.sum() >= 0.95

    def test_dilation_radius_grows_mask(self):
        rgb = np.full((64, 64, 3), 0.4)
        paint_cross(rgb, 32, 32, color=(1.0, 0.9, 0.1))
        small = detect_markers(rgb, MarkerConfig(dilate_radius=0)).sum()
        large = detect_markers(rgb, MarkerConfig(dilate_radius=3)).sum()
        assert large > small


class TestTeleaInpaint:
    def test_identity_outside_hole_exact(self):
        rng = np.random.default_rng(2)
        img = rng.random((40, 40))
        hole = np.zeros((40, 40), dtype=bool)
        hole[10:20, 15:30] = True
        out = telea_inpaint(img, hole)
        assert np.array_equal(out[~hole], img[~hole])

    def test_constant_preserved(self):
        img = np.full((32, 32), 0.5)
        hole = np.zeros((32, 32), dtype=bool)
        hole[8:20, 10:22] = True
        out = telea_inpaint(img, hole)
        assert np.abs(out - 0.5).max() <= 1e-6

    def test_linear_ramp_reconstruction(self):
        x = np.linspace(0.0, 1.0, 64)
        ramp = np.tile(x, (64, 1))
        hole = np.zeros((64, 64), dtype=bool)
        hole[30:35, 30:35] = True
        out = telea_inpaint(ramp, hole)
        assert np.abs(out - ramp)[hole].max() <= 0.05

    def test_empty_hole_identity(self):
        img = np.random.default_rng(3).random((16, 16))
        out = telea_inpaint(img, np.zeros((16, 16), dtype=bool))
        assert np.array_equal(out, img)

    def test_full_hole_errors(self):
        with pytest.raises(ValueError, match="no boundary information"):
            telea_inpaint(np.zeros((8, 8)), np.ones((8, 8), dtype=bool))

    def test_shape_mismatch_errors(self):
        with pytest.raises(ValueError, match="shapes differ"):
            telea_inpaint(np.zeros((8, 8)), np.zeros((9, 8), dtype=bool))

    def test_values_within_neighborhood_range(self):
        rng = np.random.default_rng(4)
        img = rng.random((48, 48))
        hole = np.zeros((48, 48), dtype=bool)
        hole[20:30, 5:25] = True
        out = telea_inpaint(img, hole, radius=3)
        band = ndimage.binary_dilation(hole, iterations=3) & ~hole
        assert out[hole].min() >= img[band].min() - 1e-6
        assert out[hole].max() <= img[band].max() + 1e-6


class TestPrepareImage:
    def test_512_input_resized_to_256(self):
        img = np.random.default_rng(5).random((512, 512))
        out = prepare_image(img, out_size=256)
        assert out.shape == (256, 256)
        assert out.min() >= 0 and out.max() <= 1

    def test_marker_free_same_size_is_identity(self):
        img = np.random.default_rng(6).random((64, 64))
        out = prepare_image(img, out_size=64)
        assert np.array_equal(out, img)

    def test_markers_change_only_near_marker_mask(self):
        rng = np.random.default_rng(7)
        gray = rng.random((64, 64)) * 0.5
        rgb = np.repeat(gray[..., None], 3, axis=-1)
        paint_cross(rgb, 30, 30, color=(1.0, 0.9, 0.1))
        markers = detect_markers(rgb).astype(bool)
        out = prepare_image(rgb, out_size=64)
        from cervixseg.preprocess import rgb_to_grayscale

        base = rgb_to_grayscale(rgb)
        assert np.array_equal(out[~markers], np.clip(base, 0, 1)[~markers])
        assert not np.array_equal(out[markers], base[markers])

    def test_unreadable_file_raises_io_error(self, tmp_path):
        path = tmp_path / "missing.png"
        with pytest.raises(OSError, match="missing.png"):
            prepare_image(path)

    def test_path_input_round_trip(self, tmp_path):
        img = np.random.default_rng(8).random((32, 32))
        path = tmp_path / "img.png"
        save_gray_png(img, path)
        out = prepare_image(path, out_size=32)
        assert out.shape == (32, 32)
        assert np.abs(out - img).max() <= 1 / 255 + 1e-12


def make_sample(label=0, pid="P0", size=64, seed=0, disk=False):
    rng = np.random.default_rng(seed)
    image = rng.random((size, size))
    mask = np.zeros((size, size), dtype=np.uint8)
    if disk:
        yy, xx = np.mgrid[0:size, 0:size]
        mask[(yy - size / 2) ** 2 + (xx - size / 2) ** 2 <= (size / 4) ** 2] = 1
    else:
        mask[size // 4 : size // 2, size // 4 : size // 2] = 1
    return Sample(image=image, mask=mask, label=label, patient_id=pid, sample_id=f"{pid}_s{seed}")


class TestAugment:
    def test_identity_policy_leaves_sample_unchanged(self):
        s = make_sample()
        out = augment(s, AugmentationPolicy.identity(), np.random.default_rng(0))
        assert np.array_equal(out.image, s.image)
        assert np.array_equal(out.mask, s.mask)
        assert out.label == s.label and out.patient_id == s.patient_id

    def test_label_patient_and_binarity_preserved(self):
        policy = AugmentationPolicy(
            p_rotate=1.0, p_crop=1.0, p_brightness=1.0, p_contrast=1.0, p_noise=1.0
        )
        s = make_sample(label=1, pid="P7", disk=True)
        out = augment(s, policy, np.random.default_rng(1))
        assert out.label == 1 and out.patient_id == "P7"
        assert set(np.unique(out.mask)) <= {0, 1}
        assert out.image.min() >= 0 and out.image.max() <= 1

    def test_geometry_applied_identically_to_image_and_mask(self):
        # Encode the mask into the image so the shared transform is observable.
        # Bilinear (image) vs nearest (mask) interpolation differ only in a
        # sub-pixel boundary ring; the exact-parameter check lives in
        # test_rotation_angle_within_policy_range.
        s = make_sample(disk=True)
        s.image = s.mask.astype(np.float64)
        policy = AugmentationPolicy(p_rotate=1.0, p_crop=1.0, p_brightness=0, p_contrast=0, p_noise=0)
        out = augment(s, policy, np.random.default_rng(3))
        assert iou((out.image >= 0.5).astype(np.uint8), out.mask) >= 0.95

    def test_rotation_round_trip_iou(self):
        s = make_sample(disk=True)
        up = ndimage.rotate(s.mask, 15.0, reshape=False, order=0, mode="constant", cval=0)
        back = ndimage.rotate(up, -15.0, reshape=False, order=0, mode="constant", cval=0)
        assert iou((back > 0).astype(np.uint8), s.mask) >= 0.98

    def test_rotation_angle_within_policy_range(self):
        policy = AugmentationPolicy(p_rotate=1.0, p_crop=0, p_brightness=0, p_contrast=0, p_noise=0)
        rng = np.random.default_rng(4)
        # rng first draws the gate, then the angle
        probe = np.random.default_rng(4)
        probe.random()
        angle = probe.uniform(-15.0, 15.0)
        assert -15.0 <= angle <= 15.0
        s = make_sample(disk=True)
        out = augment(s, policy, rng)
        expected = ndimage.rotate(s.mask, angle, reshape=False, order=0, mode="constant", cval=0)
        assert np.array_equal(out.mask, (expected > 0).astype(np.uint8))

    def test_policy_validation(self):
        with pytest.raises(ConfigError, match="rotation_degrees"):
            AugmentationPolicy(rotation_degrees=(-200.0, 0.0))
        with pytest.raises(ConfigError, match="crop_fraction"):
            AugmentationPolicy(crop_fraction=(0.0, 0.5))
        with pytest.raises(ConfigError, match="p_noise"):
            AugmentationPolicy(p_noise=1.5)


class TestBalanceAndAugment:
    def make_split(self, n_control, n_preterm, pid_prefix="P"):
        out = []
        for i in range(n_control):
            out.append(make_sample(label=0, pid=f"{pid_prefix}c{i}", seed=i))
        for i in range(n_preterm):
            out.append(make_sample(label=1, pid=f"{pid_prefix}p{i}", seed=100 + i))
        return out

    def test_nine_to_one_adds_eight_copies(self):
        data = {"train": self.make_split(9, 1)}
        out = balance_and_augment(data, AugmentationPolicy.identity(), rng_seed=0)
        train = out["train"]
        assert len(train) == 18
        pos = [s for s in train if s.label == 1]
        assert len(pos) == 9
        assert sum("_aug" in s.sample_id for s in pos) == 8

    def test_already_balanced_unchanged(self):
        data = {"train": self.make_split(5, 5)}
        out = balance_and_augment(data, AugmentationPolicy.identity(), rng_seed=0)
        assert len(out["train"]) == 10

    def test_majority_multiplier_reaches_paper_scale(self):
        data = {"train": self.make_split(319, 35)}
        out = balance_and_augment(
            data, AugmentationPolicy.identity(), rng_seed=0, majority_multiplier=10
        )
        train = out["train"]
        n_pos = sum(s.label == 1 for s in train)
        n_neg = sum(s.label == 0 for s in train)
        assert n_neg == 3190
        assert abs(n_pos - n_neg) <= 1
        # originals retained
        originals = [s for s in train if "_aug" not in s.sample_id]
        assert len(originals) == 354

    def test_augmented_copies_inherit_source_identity(self):
        data = {"val": self.make_split(4, 1)}
        out = balance_and_augment(data, AugmentationPolicy.identity(), rng_seed=0)
        for s in out["val"]:
            if "_aug" in s.sample_id:
                assert s.label == 1
                assert s.patient_id.startswith("Pp")

    def test_single_class_split_errors_with_name(self):
        data = {"test": self.make_split(4, 0)}
        with pytest.raises(ValueError, match="'test'"):
            balance_and_augment(data, AugmentationPolicy.identity(), rng_seed=0)

    def test_deterministic_given_seed(self):
        policy = AugmentationPolicy()
        a = balance_and_augment({"train": self.make_split(6, 2)}, policy, rng_seed=9)
        b = balance_and_augment({"train": self.make_split(6, 2)}, policy, rng_seed=9)
        for s, t in zip(a["train"], b["train"]):
            assert np.array_equal(s.image, t.image)


class TestSplitByPatient:
    def make_patients(self, n_patients, images_each=1):
        out = []
        for p in range(n_patients):
            for k in range(images_each):
                s = make_sample(label=p % 2, pid=f"P{p:03d}", seed=p * 10 + k)
                s.sample_id = f"P{p:03d}_i{k}"
                out.append(s)
        return out

    def test_ten_patients_six_two_two(self):
        manifest = split_by_patient(self.make_patients(10), (0.6, 0.2, 0.2), seed=0)
        counts = {k: len(v) for k, v in manifest.splits.items()}
        assert counts == {"train": 6, "val": 2, "test": 2}

    def test_patient_disjointness_and_partition(self):
        data = self.make_patients(23, images_each=3)
        manifest = split_by_patient(data, (0.6, 0.2, 0.2), seed=3)
        by_id = {s.sample_id: s for s in data}
        all_ids = [i for ids in manifest.splits.values() for i in ids]
        assert sorted(all_ids) == sorted(by_id)  # covering, no duplicates
        patient_sets = [
            {by_id[i].patient_id for i in ids} for ids in manifest.splits.values()
        ]
        for i in range(len(patient_sets)):
            for j in range(i + 1, len(patient_sets)):
                assert not (patient_sets[i] & patient_sets[j])

    def test_354_single_image_patients(self):
        manifest = split_by_patient(self.make_patients(354), (0.6, 0.2, 0.2), seed=1)
        counts = [len(manifest.splits[k]) for k in ("train", "val", "test")]
        assert counts == [212, 71, 71]

    def test_deterministic_per_seed(self):
        data = self.make_patients(20)
        a = split_by_patient(data, seed=7)
        b = split_by_patient(data, seed=7)
        assert a.splits == b.splits
        c = split_by_patient(data, seed=8)
        assert a.splits != c.splits

    def test_fraction_validation(self):
        data = self.make_patients(10)
        with pytest.raises(ConfigError, match="sum to 1"):
            split_by_patient(data, (0.5, 0.2, 0.2))
        with pytest.raises(ConfigError, match="positive"):
            split_by_patient(data, (1.2, -0.1, -0.1))

    def test_fewer_patients_than_splits_errors(self):
        with pytest.raises(ValueError, match="at least 3 patients"):
            split_by_patient(self.make_patients(2), (0.6, 0.2, 0.2))

    def test_manifest_json_round_trip(self, tmp_path):
        from cervixseg.preprocess import SplitManifest

        manifest = split_by_patient(self.make_patients(10), seed=5)
        path = tmp_path / "splits.json"
        manifest.save(path)
        back = SplitManifest.load(path)
        assert back == manifest
