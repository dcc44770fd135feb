"""Preprocessing: marker removal, resizing, augmentation, balancing, splits.

Embedded annotation crosses (yellow/green) are detected by hue/saturation
thresholds and removed by fast-marching inpainting. Augmentation applies the
same geometric transform to image and mask (mask via nearest neighbor) and
photometric changes to the image only. Splitting is patient-level: all images
of one patient land in the same split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError
from .inpaint import telea_inpaint
from .phantom import Sample
from .pngio import load_gray_png, load_rgb_png

__all__ = [
    "MarkerConfig",
    "AugmentationPolicy",
    "SplitManifest",
    "detect_markers",
    "prepare_image",
    "augment",
    "balance_and_augment",
    "split_by_patient",
    "rgb_to_grayscale",
    "resize_bilinear",
    "resize_mask_nearest",
]

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class MarkerConfig:
    """Hue/saturation bands for the embedded cross markers.

    Hue uses half-degree units in [0, 180): pure yellow sits at 30, pure
    green at 60.
    """

    yellow_hue: tuple[float, float] = (20.0, 40.0)
    green_hue: tuple[float, float] = (40.0, 70.0)
    min_saturation: float = 0.4
    min_value: float = 0.15
    dilate_radius: int = 2


@dataclass
class AugmentationPolicy:
    """Ranges and per-op probabilities for random augmentation."""

    rotation_degrees: tuple[float, float] = (-15.0, 15.0)
    crop_fraction: tuple[float, float] = (0.8, 1.0)  # retained area
    brightness_delta: tuple[float, float] = (-0.1, 0.1)
    contrast_factor: tuple[float, float] = (0.9, 1.1)
    noise_sd: tuple[float, float] = (0.0, 0.03)
    p_rotate: float = 0.5
    p_crop: float = 0.5
    p_brightness: float = 0.5
    p_contrast: float = 0.5
    p_noise: float = 0.5

    def __post_init__(self):
        lo, hi = self.rotation_degrees
        if not (-180.0 <= lo <= hi <= 180.0):
            raise ConfigError(f"rotation_degrees: need an interval within [-180, 180], got ({lo}, {hi})")
        clo, chi = self.crop_fraction
        if not (0.0 < clo <= chi <= 1.0):
            raise ConfigError(f"crop_fraction: need an interval within (0, 1], got ({clo}, {chi})")
        for name in ("p_rotate", "p_crop", "p_brightness", "p_contrast", "p_noise"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}: need a probability in [0, 1], got {p}")

    @classmethod
    def identity(cls) -> "AugmentationPolicy":
        return cls(p_rotate=0.0, p_crop=0.0, p_brightness=0.0, p_contrast=0.0, p_noise=0.0)


@dataclass
class SplitManifest:
    """Sample ids per split, plus the parameters that produced them."""

    splits: dict[str, list[str]]
    fractions: tuple[float, ...]
    seed: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "splits": {k: list(v) for k, v in self.splits.items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SplitManifest":
        return cls(
            splits={k: list(v) for k, v in doc["splits"].items()},
            fractions=tuple(doc["fractions"]),
            seed=int(doc["seed"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path) -> "SplitManifest":
        return cls.from_json(json.loads(Path(path).read_text()))


def _rgb_to_hsv_half(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hue in half-degrees [0, 180), saturation and value in [0, 1]."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    c = mx - mn
    hue = np.zeros_like(mx)
    nz = c > 0
    rmax = nz & (mx == r)
    gmax = nz & ~rmax & (mx == g)
    bmax = nz & ~rmax & ~gmax
    hue[rmax] = np.mod((g[rmax] - b[rmax]) / c[rmax], 6.0)
    hue[gmax] = (b[gmax] - r[gmax]) / c[gmax] + 2.0
    hue[bmax] = (r[bmax] - g[bmax]) / c[bmax] + 4.0
    hue *= 30.0  # sextant -> half-degrees
    sat = np.where(mx > 0, c / np.maximum(mx, 1e-12), 0.0)
    return hue, sat, mx


def _disk(radius: int) -> np.ndarray:
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return (yy * yy + xx * xx) <= radius * radius


def detect_markers(image: np.ndarray, config: MarkerConfig | None = None) -> np.ndarray:
    """Binary mask of yellow/green cross markers in an RGB image.

    Grayscale input has no chroma: returns an all-zero mask.
    """
    config = config or MarkerConfig()
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return np.zeros(img.shape, dtype=np.uint8)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    if img.max() > 1.0:
        img = img / 255.0
    hue, sat, val = _rgb_to_hsv_half(img)
    ylo, yhi = config.yellow_hue
    glo, ghi = config.green_hue
    in_band = ((hue >= ylo) & (hue <= yhi)) | ((hue >= glo) & (hue <= ghi))
    mask = in_band & (sat >= config.min_saturation) & (val >= config.min_value)
    if config.dilate_radius > 0 and mask.any():
        mask = ndimage.binary_dilation(mask, structure=_disk(config.dilate_radius))
    return mask.astype(np.uint8)


def rgb_to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luminance."""
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def resize_bilinear(image: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a 2-D float image to (height, width)."""
    h, w = out_size
    if image.shape == (h, w):
        return image.copy()
    pil = Image.fromarray(np.asarray(image, dtype=np.float32), mode="F")
    return np.asarray(pil.resize((w, h), Image.BILINEAR), dtype=np.float64)


def resize_mask_nearest(mask: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    h, w = out_size
    if mask.shape == (h, w):
        return mask.copy()
    pil = Image.fromarray(np.asarray(mask, dtype=np.uint8), mode="L")
    return np.asarray(pil.resize((w, h), Image.NEAREST), dtype=np.uint8)


def prepare_image(
    image,
    out_size: int = 256,
    marker_config: MarkerConfig | None = None,
    inpaint_radius: int = 3,
) -> np.ndarray:
    """Marker removal + grayscale + bilinear resize to out_size x out_size.

    `image` is an array ([0,1] grayscale or RGB) or a readable image path.
    Output intensities lie in [0, 1].
    """
    if isinstance(image, (str, Path)):
        path = Path(image)
        try:
            arr = load_rgb_png(path)
        except OSError as e:
            raise OSError(f"cannot read image file {path}: {e}") from e
        # Collapse back to 2-D when the file had no chroma at all.
        if np.ptp(arr, axis=-1).max() == 0:
            arr = arr[..., 0]
    else:
        arr = np.asarray(image, dtype=np.float64)
        if arr.max() > 1.0:
            arr = arr / 255.0

    if arr.ndim == 3:
        markers = detect_markers(arr, marker_config)
        gray = rgb_to_grayscale(arr)
        if markers.any():
            gray = telea_inpaint(gray, markers, radius=inpaint_radius)
    else:
        gray = arr

    out = resize_bilinear(gray, (out_size, out_size))
    return np.clip(out, 0.0, 1.0)


def augment(sample: Sample, policy: AugmentationPolicy, rng: np.random.Generator) -> Sample:
    """One random augmentation draw.

    Geometric ops (rotation, crop) hit image and mask with identical
    parameters; photometric ops (brightness, contrast, noise) hit the image
    only. Label and patient id pass through untouched.
    """
    image = sample.image.copy()
    mask = sample.mask.copy()
    h, w = image.shape

    if rng.random() < policy.p_rotate:
        angle = rng.uniform(*policy.rotation_degrees)
        image = ndimage.rotate(image, angle, reshape=False, order=1, mode="constant", cval=0.0)
        mask = ndimage.rotate(mask, angle, reshape=False, order=0, mode="constant", cval=0)

    if rng.random() < policy.p_crop:
        frac = rng.uniform(*policy.crop_fraction)
        side = max(8, int(round(h * math.sqrt(frac))))
        side = min(side, h)
        y0 = int(rng.integers(0, h - side + 1))
        x0 = int(rng.integers(0, w - side + 1))
        image = resize_bilinear(image[y0 : y0 + side, x0 : x0 + side], (h, w))
        mask = resize_mask_nearest(mask[y0 : y0 + side, x0 : x0 + side], (h, w))

    if rng.random() < policy.p_brightness:
        image = image + rng.uniform(*policy.brightness_delta)

    if rng.random() < policy.p_contrast:
        factor = rng.uniform(*policy.contrast_factor)
        mean = image.mean()
        image = (image - mean) * factor + mean

    if rng.random() < policy.p_noise:
        sd = rng.uniform(*policy.noise_sd)
        image = image + sd * rng.standard_normal(image.shape)

    image = np.clip(image, 0.0, 1.0)
    mask = (mask > 0).astype(np.uint8)
    return replace(sample, image=image, mask=mask)


def balance_and_augment(
    dataset_by_split: dict[str, list[Sample]],
    policy: AugmentationPolicy,
    target_ratio: float = 0.5,
    rng_seed: int = 0,
    majority_multiplier: int = 1,
) -> dict[str, list[Sample]]:
    """Per split, add augmented copies until the class ratio hits the target.

    Originals are always retained. With majority_multiplier > 1 the majority
    class is expanded first (each original gains multiplier-1 augmented
    copies), then the minority is topped up to target_ratio within one
    sample. Every copy inherits its source's label, patient id and split.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ConfigError(f"target_ratio: need a value in (0, 1), got {target_ratio}")
    if majority_multiplier < 1:
        raise ConfigError(f"majority_multiplier: need >= 1, got {majority_multiplier}")

    out: dict[str, list[Sample]] = {}
    for split_idx, split_name in enumerate(sorted(dataset_by_split)):
        samples = dataset_by_split[split_name]
        rng = np.random.default_rng([rng_seed, split_idx])
        pos = [s for s in samples if s.label == 1]
        neg = [s for s in samples if s.label == 0]
        if not pos or not neg:
            raise ValueError(
                f"split '{split_name}' contains a single class and cannot be balanced"
            )
        minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)

        augmented: list[Sample] = list(samples)

        def add_copy(src: Sample, k: int) -> None:
            copy = augment(src, policy, rng)
            copy.sample_id = f"{src.sample_id}_aug{k}"
            augmented.append(copy)

        counter = 0
        if majority_multiplier > 1:
            for src in majority:
                for _ in range(majority_multiplier - 1):
                    add_copy(src, counter)
                    counter += 1
        n_majority = len(majority) * majority_multiplier
        minority_target = int(round(n_majority * target_ratio / (1.0 - target_ratio)))
        deficit = minority_target - len(minority)
        for k in range(max(deficit, 0)):
            add_copy(minority[k % len(minority)], counter)
            counter += 1
        out[split_name] = augmented
    return out


def _target_counts(n: int, fractions: tuple[float, ...]) -> list[int]:
    raw = [n * f for f in fractions]
    counts = [math.floor(x) for x in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def split_by_patient(
    dataset: list[Sample],
    fractions: tuple[float, ...] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> SplitManifest:
    """Assign whole patients to splits by seeded shuffle.

    Image-count targets use floor-and-distribute rounding; a greedy fill over
    the shuffled patient order keeps each split within one patient's worth of
    images of its target.
    """
    if any(f <= 0 for f in fractions):
        raise ConfigError(f"fractions: all must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions: must sum to 1, got sum {sum(fractions)}")

    by_patient: dict[str, list[Sample]] = {}
    for s in dataset:
        by_patient.setdefault(s.patient_id, []).append(s)
    patients = sorted(by_patient)
    if len(patients) < len(fractions):
        raise ValueError(
            f"need at least {len(fractions)} patients for {len(fractions)} splits, got {len(patients)}"
        )

    rng = np.random.default_rng(seed)
    order = [patients[i] for i in rng.permutation(len(patients))]
    targets = _target_counts(len(dataset), fractions)
    names = [SPLIT_NAMES[i] if i < len(SPLIT_NAMES) else f"split{i}" for i in range(len(fractions))]

    splits: dict[str, list[str]] = {name: [] for name in names}
    counts = {name: 0 for name in names}
    k = 0
    for patient in order:
        while k < len(names) - 1 and counts[names[k]] >= targets[k]:
            k += 1
        name = names[k]
        for s in by_patient[patient]:
            splits[name].append(s.sample_id)
        counts[name] += len(by_patient[patient])
    return SplitManifest(splits=splits, fractions=tuple(fractions), seed=seed)
