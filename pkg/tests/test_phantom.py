import json

import numpy as np
import pytest
from scipy import ndimage

from cervixseg.errors import ConfigError
from cervixseg.metrics import roc_auc
from cervixseg.phantom import (
    FOUR_CONNECTED,
    PhantomSpec,
    generate_dataset,
    generate_sample,
    load_manifest,
)


def test_determinism_bit_identical():
    spec = PhantomSpec(image_size=64, seed=123)
    a = generate_sample(spec, 5)
    b = generate_sample(spec, 5)
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.mask, b.mask)
    assert a.label == b.label
    assert a.patient_id == b.patient_id


def test_zero_preterm_fraction_gives_control_labels():
    spec = PhantomSpec(image_size=64, preterm_fraction=0.0, seed=1)
    assert all(generate_sample(spec, i).label == 0 for i in range(8))


def test_mask_area_within_scale_range():
    spec = PhantomSpec(image_size=64, cervix_scale_range=(0.1, 0.3), seed=2)
    for i in range(12):
        frac = generate_sample(spec, i).mask.sum() / 4096
        assert 0.1 <= frac <= 0.3


def test_mask_single_four_connected_component():
    spec = PhantomSpec(image_size=64, seed=9)
    for i in range(12):
        mask = generate_sample(spec, i).mask
        _, n = ndimage.label(mask, structure=FOUR_CONNECTED)
        assert n == 1


def test_image_intensities_in_unit_range():
    s = generate_sample(PhantomSpec(image_size=64, seed=4), 0)
    assert s.image.min() >= 0.0 and s.image.max() <= 1.0
    assert set(np.unique(s.mask)) <= {0, 1}


def test_invalid_spec_errors_name_invariant():
    with pytest.raises(ConfigError, match="cervix_scale_range"):
        generate_sample(PhantomSpec(cervix_scale_range=(0.5, 0.2)), 0)
    with pytest.raises(ConfigError, match="preterm_fraction"):
        generate_sample(PhantomSpec(preterm_fraction=1.5), 0)
    with pytest.raises(ConfigError, match="image_size"):
        generate_sample(PhantomSpec(image_size=16), 0)
    with pytest.raises(ConfigError, match="index"):
        generate_sample(PhantomSpec(), -1)


def test_patient_ids_unique_per_index_by_default():
    spec = PhantomSpec(image_size=64, seed=0)
    ids = {generate_sample(spec, i).patient_id for i in range(6)}
    assert len(ids) == 6


def test_images_per_patient_groups_indices():
    spec = PhantomSpec(image_size=64, seed=0, images_per_patient=3)
    pids = [generate_sample(spec, i).patient_id for i in range(6)]
    assert pids[0] == pids[1] == pids[2]
    assert pids[3] == pids[4] == pids[5]
    assert pids[0] != pids[3]


def test_dataset_counts_match_rounded_fraction(tmp_path):
    spec = PhantomSpec(image_size=64, preterm_fraction=0.1, seed=5)
    samples, _ = generate_dataset(spec, 10, tmp_path)
    assert sum(s.label for s in samples) == 1


def test_dataset_paper_scale_class_ratio(tmp_path):
    # 354 images, 35 preterm / 319 control
    spec = PhantomSpec(image_size=64, preterm_fraction=35 / 354, seed=6)
    labels = [generate_sample(spec, i).label for i in range(354)]
    assert sum(labels) == 35


def test_manifest_round_trip(tmp_path):
    spec = PhantomSpec(image_size=64, seed=8)
    samples, manifest_path = generate_dataset(spec, 3, tmp_path)
    doc = json.loads(manifest_path.read_text())
    assert len(doc["samples"]) == 3
    for entry in doc["samples"]:
        assert set(entry) >= {"path", "label", "patient_id", "mask_path"}
    assert "noise_model" in doc

    manifest, loaded = load_manifest(manifest_path)
    assert [s.sample_id for s in loaded] == [s.sample_id for s in samples]
    for orig, back in zip(samples, loaded):
        assert np.array_equal(orig.mask, back.mask)
        # images round trip through 8-bit quantization
        assert np.abs(orig.image - back.image).max() <= 1 / 255 + 1e-12
        assert back.label == orig.label


def test_dataset_regeneration_byte_identical(tmp_path):
    spec = PhantomSpec(image_size=64, seed=21)
    generate_dataset(spec, 2, tmp_path / "a")
    generate_dataset(spec, 2, tmp_path / "b")
    for rel in ("images/s00000.png", "masks/s00001.png"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_cue_separability_oracle():
    # Thresholding mean intensity inside the planted cue region must separate
    # the classes: AUC >= 0.95 over 200 samples at default signal strength.
    spec = PhantomSpec(image_size=128, preterm_fraction=0.5, seed=11)
    scores, labels = [], []
    for i in range(200):
        s = generate_sample(spec, i)
        region = s.cue_region().astype(bool)
        scores.append(-float(s.image[region].mean()))  # darker cue -> higher score
        labels.append(s.label)
    assert roc_auc(labels, scores) >= 0.95


def test_cue_sits_in_lower_part_of_mask():
    spec = PhantomSpec(image_size=64, seed=13)
    for i in range(6):
        s = generate_sample(spec, i)
        ys = np.nonzero(s.mask)[0]
        assert s.cue_center[1] >= np.percentile(ys, 50)
