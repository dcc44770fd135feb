"""Procedural ultrasound-like phantoms with exact cervix-shaped ground truth.

Each sample is an arch-shaped region (a cubic Bezier closed by its chord,
rasterized through the annotations module, so the same geometry path serves
both the phantom and the annotation tool), textured to look vaguely sonographic.
Preterm samples additionally carry a hypoechoic (dark) patch near the lower
part of the shape; its location and radius are recorded so downstream checks
can ask whether a classifier actually looked there.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .annotations import CervixAnnotation, annotation_to_mask, outline_polygon
from .errors import ConfigError
from .pngio import load_gray_png, load_mask_png, save_gray_png, save_mask_png

__all__ = ["PhantomSpec", "Sample", "generate_sample", "generate_dataset", "load_manifest"]

NOISE_MODEL = (
    "multiplicative Gaussian speckle: image *= 1 + sd * N(0,1), clipped to [0,1]"
)

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


@dataclass
class PhantomSpec:
    """Parameters of the synthetic dataset generator."""

    image_size: int = 256
    speckle_noise_sd: float = 0.15
    cervix_scale_range: tuple[float, float] = (0.10, 0.30)
    preterm_fraction: float = 0.35
    class_signal_strength: float = 0.5
    seed: int = 0
    images_per_patient: int = 1

    def validate(self) -> None:
        lo, hi = self.cervix_scale_range
        if not (0.0 < lo <= hi < 1.0):
            raise ConfigError(
                f"cervix_scale_range: need 0 < min <= max < 1, got ({lo}, {hi})"
            )
        if not 0.0 <= self.preterm_fraction <= 1.0:
            raise ConfigError(
                f"preterm_fraction: need a probability in [0, 1], got {self.preterm_fraction}"
            )
        if self.image_size < 32:
            raise ConfigError(f"image_size: need >= 32, got {self.image_size}")
        if self.speckle_noise_sd < 0:
            raise ConfigError(f"speckle_noise_sd: need >= 0, got {self.speckle_noise_sd}")
        if self.class_signal_strength < 0:
            raise ConfigError(
                f"class_signal_strength: need >= 0, got {self.class_signal_strength}"
            )
        if self.images_per_patient < 1:
            raise ConfigError(
                f"images_per_patient: need >= 1, got {self.images_per_patient}"
            )


@dataclass
class Sample:
    """One phantom: grayscale image, binary mask, birth label, patient id."""

    image: np.ndarray  # (H, W) float in [0, 1]
    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    label: int  # 0 = control, 1 = preterm
    patient_id: str
    sample_id: str = ""
    cue_center: tuple[float, float] = (0.0, 0.0)  # (x, y) of the planted cue
    cue_radius: float = 0.0

    def cue_region(self) -> np.ndarray:
        """Binary disk mask of the planted (or would-be) class cue."""
        h, w = self.mask.shape
        yy, xx = np.mgrid[0:h, 0:w]
        cx, cy = self.cue_center
        return ((xx - cx) ** 2 + (yy - cy) ** 2 <= self.cue_radius**2).astype(np.uint8)


def _label_for_index(index: int, fraction: float) -> int:
    # Systematic assignment: any prefix of n samples contains round(n * fraction)
    # preterm labels (half-up), which keeps the empirical fraction within +-1
    # sample of the target while staying a pure function of the index.
    return int(
        math.floor((index + 1) * fraction + 0.5) > math.floor(index * fraction + 0.5)
    )


def _template_points(rng: np.random.Generator) -> np.ndarray:
    # Arch: endpoints on the chord, interior points lifted to one side. The
    # convex-hull property then keeps the curve on that side, so the closed
    # outline cannot self-intersect the chord.
    half_w = 1.0
    a1 = rng.uniform(0.0, 0.7)
    a2 = rng.uniform(0.0, 0.7)
    e1 = rng.uniform(0.9, 1.9)
    e2 = rng.uniform(0.9, 1.9)
    return np.array(
        [
            [-half_w, 0.0],
            [-half_w + a1, -e1],
            [half_w - a2, -e2],
            [half_w, 0.0],
        ]
    )


def _place(template: np.ndarray, scale: float, angle: float, center: np.ndarray, size: int) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    pts = (template * scale) @ rot.T
    pts = pts - pts.mean(axis=0) + center
    # Keep the control hull inside the frame; the curve follows.
    margin = 2.0
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    shift = np.zeros(2)
    shift = np.where(lo < margin, margin - lo, shift)
    shift = np.where(hi > size - margin, size - margin - hi, shift)
    return pts + shift


def _mask_geometry(rng: np.random.Generator, spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sample control points until the rasterized shape lands in the target
    area range as a single, hole-free 4-connected component."""
    size = spec.image_size
    lo, hi = spec.cervix_scale_range
    span = hi - lo
    for _ in range(64):
        template = _template_points(rng)
        target_frac = rng.uniform(lo + 0.15 * span, hi - 0.15 * span)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        center = size / 2.0 + rng.uniform(-0.06, 0.06, size=2) * size
        # Shoelace area of the sampled template outline sets the initial scale.
        poly = outline_polygon(template, samples=128)
        area_t = 0.5 * abs(
            np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
        )
        scale = math.sqrt(target_frac * size * size / area_t)
        mask = None
        pts = None
        for _ in range(8):
            pts = _place(template, scale, angle, center, size)
            ann = CervixAnnotation(image_id="phantom", control_points=pts)
            mask = annotation_to_mask(ann, size, size).pixels
            measured = int(mask.sum())
            if measured == 0:
                break
            frac = measured / (size * size)
            if lo <= frac <= hi:
                _, n_fg = ndimage.label(mask, structure=FOUR_CONNECTED)
                inv, n_bg = ndimage.label(1 - mask)  # 8-connected background
                if n_fg == 1 and n_bg == 1:
                    return mask, pts
                break
            scale *= math.sqrt(target_frac * size * size / measured)
        # fall through: resample a fresh template
    raise RuntimeError("phantom geometry sampling failed to converge")


def _smooth_field(rng: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma)
    sd = field.std()
    return field / sd if sd > 0 else field


def _cue_geometry(mask: np.ndarray) -> tuple[tuple[float, float], float]:
    ys, xs = np.nonzero(mask)
    y_cut = np.percentile(ys, 75.0)
    sel = ys >= y_cut
    cx = float(xs[sel].mean())
    cy = float(ys[sel].mean())
    # Wide enough to register at the coarse resolution of bottleneck
    # activation maps, yet well under a tenth of the image.
    radius = 0.60 * math.sqrt(len(ys) / math.pi)
    return (cx, cy), radius


def generate_sample(spec: PhantomSpec, index: int) -> Sample:
    """Deterministically generate the index-th phantom of a spec.

    The same (spec.seed, index) always yields bit-identical image, mask and
    label. Preterm samples get a dark textural patch of amplitude
    class_signal_strength centered in the lower part of the shape.
    """
    spec.validate()
    if index < 0:
        raise ConfigError(f"index: need >= 0, got {index}")
    size = spec.image_size
    rng = np.random.default_rng([spec.seed, index])
    label = _label_for_index(index, spec.preterm_fraction)

    mask, _ = _mask_geometry(rng, spec)
    cue_center, cue_radius = _cue_geometry(mask)

    background = 0.22 + 0.10 * _smooth_field(rng, size, sigma=size / 6.0)
    interior = 0.60 + 0.06 * _smooth_field(rng, size, sigma=size / 10.0)
    soft = ndimage.gaussian_filter(mask.astype(np.float64), 1.2)
    image = background * (1.0 - soft) + interior * soft

    if label == 1 and spec.class_signal_strength > 0:
        yy, xx = np.mgrid[0:size, 0:size]
        cx, cy = cue_center
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        bump = np.exp(-d2 / (2.0 * (cue_radius / 1.6) ** 2))
        bump[d2 > cue_radius**2] = 0.0
        image = image * (1.0 - spec.class_signal_strength * bump)

    image = image * (1.0 + spec.speckle_noise_sd * rng.standard_normal((size, size)))
    image = np.clip(image, 0.0, 1.0)

    patient = index // spec.images_per_patient
    return Sample(
        image=image,
        mask=mask,
        label=label,
        patient_id=f"P{patient:05d}",
        sample_id=f"s{index:05d}",
        cue_center=cue_center,
        cue_radius=cue_radius,
    )


def generate_dataset(spec: PhantomSpec, n: int, out_dir) -> tuple[list[Sample], Path]:
    """Generate n samples, write PNGs and the JSON manifest, return both.

    The manifest lists, per sample: id, image path, mask path, label,
    patient id and the cue geometry. The empirical preterm fraction is within
    one sample of n * preterm_fraction by construction of the label rule.
    """
    spec.validate()
    if n < 1:
        raise ConfigError(f"n: need >= 1, got {n}")
    root = Path(out_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)

    samples = []
    entries = []
    for i in range(n):
        s = generate_sample(spec, i)
        img_rel = f"images/{s.sample_id}.png"
        mask_rel = f"masks/{s.sample_id}.png"
        save_gray_png(s.image, root / img_rel)
        save_mask_png(s.mask, root / mask_rel)
        entries.append(
            {
                "id": s.sample_id,
                "path": img_rel,
                "mask_path": mask_rel,
                "label": s.label,
                "patient_id": s.patient_id,
                "cue_center": [s.cue_center[0], s.cue_center[1]],
                "cue_radius": s.cue_radius,
            }
        )
        samples.append(s)

    manifest = {
        "spec": asdict(spec),
        "noise_model": NOISE_MODEL,
        "samples": entries,
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return samples, manifest_path


def load_manifest(manifest_path) -> tuple[dict, list[Sample]]:
    """Read a manifest and its PNGs back into Sample objects."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    samples = []
    for e in manifest["samples"]:
        samples.append(
            Sample(
                image=load_gray_png(root / e["path"]),
                mask=load_mask_png(root / e["mask_path"]),
                label=int(e["label"]),
                patient_id=e["patient_id"],
                sample_id=e.get("id", Path(e["path"]).stem),
                cue_center=tuple(e.get("cue_center", (0.0, 0.0))),
                cue_radius=float(e.get("cue_radius", 0.0)),
            )
        )
    return manifest, samples
