"""Cubic Bezier cervix annotations and their rasterization to binary masks.

An annotation is four control points in pixel coordinates. The outline is the
cubic Bezier through them, closed by the straight chord from the curve end
back to its start. Masks are filled with the even-odd rule, sampling each
pixel at its center (x + 0.5, y + 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CervixAnnotation",
    "SegMask",
    "eval_cubic_bezier",
    "outline_polygon",
    "annotation_to_mask",
    "fill_polygon",
    "parse_annotation",
    "serialize_annotation",
    "validate_annotation_bounds",
    "aggregate_masks",
]


@dataclass
class CervixAnnotation:
    """Four ordered control points outlining a cervix in one image."""

    image_id: str
    control_points: np.ndarray  # (4, 2) float64, (x, y) pixel coordinates
    annotator_id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=np.float64)
        if pts.shape != (4, 2):
            raise ValueError(f"control_points: expected 4 (x, y) pairs, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("control_points: coordinates must be finite")
        self.control_points = pts


@dataclass
class SegMask:
    """Binary segmentation mask for one image."""

    pixels: np.ndarray  # (H, W) uint8 in {0, 1}
    image_id: str = ""
    degenerate: bool = False  # set when the closed outline enclosed no pixels


def eval_cubic_bezier(control_points, t: float):
    """Evaluate the cubic Bezier at parameter t in [0, 1].

    Returns the point (1-t)^3 P0 + 3(1-t)^2 t P1 + 3(1-t) t^2 P2 + t^3 P3.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    p = np.asarray(control_points, dtype=np.float64)
    if p.shape != (4, 2):
        raise ValueError(f"expected 4 control points, got shape {p.shape}")
    u = 1.0 - t
    w = np.array([u**3, 3.0 * u**2 * t, 3.0 * u * t**2, t**3])
    x, y = w @ p
    return float(x), float(y)


def _bezier_points(control_points: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Vectorized curve evaluation at an array of parameters."""
    p = np.asarray(control_points, dtype=np.float64)
    u = 1.0 - ts
    w = np.stack([u**3, 3.0 * u**2 * ts, 3.0 * u * ts**2, ts**3], axis=1)
    return w @ p


def outline_polygon(control_points, samples: int = 256) -> np.ndarray:
    """Sampled closed outline: `samples` curve points; the chord P3->P0 is the
    implicit edge between the last and first vertex."""
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    ts = np.linspace(0.0, 1.0, samples)
    return _bezier_points(np.asarray(control_points, dtype=np.float64), ts)


def fill_polygon(polygon: np.ndarray, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill of a closed polygon onto a width x height grid.

    A pixel (ix, iy) is set iff its center (ix + 0.5, iy + 0.5) is inside
    under the even-odd rule with half-open vertex handling: an edge from
    (xi, yi) to (xj, yj) crosses the scanline Y when (yi > Y) != (yj > Y),
    at x = (xj - xi) * (Y - yi) / (yj - yi) + xi. Identical arithmetic to a
    per-pixel point-in-polygon test, so the two agree exactly.
    """
    poly = np.asarray(polygon, dtype=np.float64)
    mask = np.zeros((height, width), dtype=np.uint8)
    xi, yi = poly[:, 0], poly[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    for iy in range(height):
        sy = iy + 0.5
        hit = (yi > sy) != (yj > sy)
        if not hit.any():
            continue
        cross = (xj[hit] - xi[hit]) * (sy - yi[hit]) / (yj[hit] - yi[hit]) + xi[hit]
        cross.sort()
        for k in range(0, len(cross) - 1, 2):
            x0 = math.ceil(cross[k] - 0.5)
            x1 = math.ceil(cross[k + 1] - 0.5)  # exclusive
            if x1 > 0 and x0 < width:
                mask[iy, max(x0, 0) : min(x1, width)] = 1
    return mask


def annotation_to_mask(
    a: CervixAnnotation, width: int, height: int, samples: int = 256
) -> SegMask:
    """Rasterize an annotation to a filled binary mask.

    The curve is sampled at `samples` parameter values, closed by the chord
    back to the start, and filled even-odd. A degenerate outline that encloses
    no pixel center yields an all-zero mask with the degenerate flag set.
    """
    if width < 1 or height < 1:
        raise ValueError(f"mask size must be >= 1x1, got {width}x{height}")
    poly = outline_polygon(a.control_points, samples=samples)
    pixels = fill_polygon(poly, width, height)
    return SegMask(pixels=pixels, image_id=a.image_id, degenerate=not pixels.any())


def parse_annotation(document: dict) -> CervixAnnotation:
    """Parse the annotation JSON document {image_id, annotator_id, control_points}."""
    if not isinstance(document, dict):
        raise ValueError("annotation document must be a JSON object")
    for key in ("image_id", "annotator_id", "control_points"):
        if key not in document:
            raise ValueError(f"{key}: missing field")
    pts = document["control_points"]
    if not isinstance(pts, (list, tuple)) or len(pts) != 4:
        raise ValueError(f"control_points: expected 4 points, got {len(pts) if isinstance(pts, (list, tuple)) else type(pts).__name__}")
    for i, pt in enumerate(pts):
        if not isinstance(pt, (list, tuple)) or len(pt) != 2:
            raise ValueError(f"control_points[{i}]: expected an [x, y] pair")
        x, y = pt
        if not (isinstance(x, (int, float)) and isinstance(y, (int, float))):
            raise ValueError(f"control_points[{i}]: coordinates must be numbers")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"control_points[{i}]: coordinates must be finite")
    return CervixAnnotation(
        image_id=str(document["image_id"]),
        annotator_id=str(document["annotator_id"]),
        control_points=np.array(pts, dtype=np.float64),
    )


def serialize_annotation(a: CervixAnnotation) -> dict:
    """Inverse of parse_annotation; round trips exactly up to float formatting."""
    return {
        "image_id": a.image_id,
        "annotator_id": a.annotator_id,
        "control_points": [[float(x), float(y)] for x, y in a.control_points],
    }


def validate_annotation_bounds(a: CervixAnnotation, width: int, height: int) -> None:
    """Check all control points lie within [0, width] x [0, height]."""
    x, y = a.control_points[:, 0], a.control_points[:, 1]
    if (x < 0).any() or (x > width).any() or (y < 0).any() or (y > height).any():
        raise ValueError(
            f"control_points: coordinates must lie within [0, {width}] x [0, {height}]"
        )


def aggregate_masks(masks: list[np.ndarray]) -> np.ndarray:
    """Pixel-wise majority vote over several annotators' masks; ties count as
    included."""
    if not masks:
        raise ValueError("aggregate_masks needs at least one mask")
    stack = np.stack([np.asarray(m) for m in masks]).astype(np.int32)
    votes = stack.sum(axis=0)
    return (2 * votes >= len(masks)).astype(np.uint8)
