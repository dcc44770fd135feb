"""Grad-CAM heatmaps for the classification output.

Channel weights are the spatial mean of the class-score gradient at the
target layer; the map is the rectified weighted channel sum, bilinearly
upsampled to the input grid and max-normalized. The single sigmoid unit has
one logit, so the control class is explained through the negated logit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .pngio import save_gray_png, save_rgb_png

__all__ = ["CamHeatmap", "grad_cam", "overlay", "heat_colormap", "save_heatmap_artifacts"]

CLASS_NAMES = ("control", "preterm")


@dataclass
class CamHeatmap:
    grid: np.ndarray  # (H, W), values in [0, 1], max 1 unless identically zero
    target_layer: str
    target_class: str
    image_id: str = ""
    identically_zero: bool = False


def grad_cam(model, image, target_layer: str = "bottleneck", target: str = "preterm") -> CamHeatmap:
    """Class-activation map of `target` for one grayscale image.

    `model` must expose capture(layer_name) and forward_logits(x); the image
    is (H, W) in [0, 1].
    """
    if target not in CLASS_NAMES:
        raise ValueError(f"target must be one of {CLASS_NAMES}, got {target!r}")
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    model.eval()
    x = torch.from_numpy(arr)[None, None]

    with model.capture(target_layer) as handle:
        _, cls_logits = model.forward_logits(x)
        score = cls_logits.reshape(-1)[0]
        if target == "control":
            score = -score
        model.zero_grad()
        score.backward()
        activation = handle.activation[0].detach()
        gradient = handle.gradient[0].detach()

    channel_weights = gradient.mean(dim=(1, 2))
    cam = torch.relu((channel_weights[:, None, None] * activation).sum(dim=0))
    cam = torch.nn.functional.interpolate(
        cam[None, None], size=arr.shape, mode="bilinear", align_corners=False
    )[0, 0]
    cam = cam.numpy().astype(np.float64)

    peak = cam.max()
    if peak > 0:
        cam = cam / peak
        zero = False
    else:
        cam = np.zeros_like(cam)
        zero = True
    return CamHeatmap(
        grid=cam, target_layer=target_layer, target_class=target, identically_zero=zero
    )


def heat_colormap(values: np.ndarray) -> np.ndarray:
    """Fixed blue->cyan->green->yellow->red colormap, (..., 3) floats in [0, 1].

    Hand-rolled lookup so overlay bytes stay identical across plotting
    library versions.
    """
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    anchors = np.array(
        [
            [0.0, 0.0, 0.5],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ]
    )
    pos = v * (len(anchors) - 1)
    idx = np.minimum(pos.astype(int), len(anchors) - 2)
    frac = (pos - idx)[..., None]
    return anchors[idx] * (1.0 - frac) + anchors[idx + 1] * frac


def overlay(heatmap: CamHeatmap, image: np.ndarray, alpha: float = 0.4) -> np.ndarray:
    """Alpha-blend the colormapped heatmap over the grayscale image.

    Returns (H, W, 3) uint8; deterministic bytes for fixed inputs.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.shape != heatmap.grid.shape:
        raise ValueError(f"heatmap {heatmap.grid.shape} and image {img.shape} sizes differ")
    gray = np.repeat(np.clip(img, 0.0, 1.0)[..., None], 3, axis=-1)
    heat = heat_colormap(heatmap.grid)
    blended = (1.0 - alpha) * gray + alpha * heat
    return np.round(np.clip(blended, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_heatmap_artifacts(heatmap: CamHeatmap, image: np.ndarray, out_prefix) -> dict:
    """Write overlay PNG, raw heatmap PNG and the JSON sidecar."""
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_rgb_png(overlay(heatmap, image), prefix.with_suffix(".png"))
    save_gray_png(heatmap.grid, Path(f"{prefix}_heatmap.png"))
    sidecar = {
        "target_layer": heatmap.target_layer,
        "class": heatmap.target_class,
        "normalization_flag": "identically_zero" if heatmap.identically_zero else "max_normalized",
        "image_id": heatmap.image_id,
    }
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
    return sidecar
