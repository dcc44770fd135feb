"""Fast-marching inpainting of masked regions (Telea-style).

Hole pixels are filled in increasing distance from the hole boundary. The
distance field solves the Eikonal equation |grad T| = 1 by first-order fast
marching; each pixel is then a normalized weighted average of the known
pixels within `radius`, with weights combining a direction factor (alignment
with the marching front normal), a geometric distance factor and a level-set
factor. Weights are non-negative, so every filled value is a convex
combination of known values: constants are preserved and output never leaves
the range of its sources.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

__all__ = ["telea_inpaint"]

_KNOWN, _BAND, _INSIDE = 0, 1, 2


def _eikonal(t1: float, t2: float) -> float:
    """First-order Eikonal update from two axis-neighbor distances."""
    tm = min(t1, t2)
    if math.isinf(tm):
        return math.inf
    if abs(t1 - t2) < 1.0:
        s = 2.0 - (t1 - t2) ** 2
        return 0.5 * (t1 + t2 + math.sqrt(s))
    return tm + 1.0


def telea_inpaint(image: np.ndarray, hole_mask: np.ndarray, radius: int = 3) -> np.ndarray:
    """Fill `hole_mask` pixels of a grayscale image by fast-marching inpainting.

    Pixels outside the hole are returned bit-identical. Raises when the hole
    covers the whole image (no boundary information to march from).
    """
    img = np.array(image, dtype=np.float64)
    hole = np.asarray(hole_mask).astype(bool)
    if img.shape != hole.shape:
        raise ValueError(f"image {img.shape} and hole_mask {hole.shape} shapes differ")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if not hole.any():
        return img
    if hole.all():
        raise ValueError("no boundary information: hole_mask covers the entire image")

    h, w = img.shape
    flags = np.where(hole, _INSIDE, _KNOWN).astype(np.int8)
    dist = np.where(hole, np.inf, 0.0)

    # Narrow band: hole pixels with at least one known 4-neighbor.
    heap: list[tuple[float, int, int]] = []
    ys, xs = np.nonzero(hole)
    for y, x in zip(ys.tolist(), xs.tolist()):
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and flags[ny, nx] == _KNOWN:
                t = _solve_t(dist, flags, y, x, h, w)
                if t < dist[y, x]:
                    dist[y, x] = t
                flags[y, x] = _BAND
                break
    for y, x in zip(ys.tolist(), xs.tolist()):
        if flags[y, x] == _BAND:
            heapq.heappush(heap, (dist[y, x], y, x))

    while heap:
        t, y, x = heapq.heappop(heap)
        if flags[y, x] == _KNOWN or t > dist[y, x]:
            continue  # stale entry
        img[y, x] = _inpaint_pixel(img, flags, dist, y, x, radius, h, w)
        flags[y, x] = _KNOWN
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and flags[ny, nx] != _KNOWN:
                t_new = _solve_t(dist, flags, ny, nx, h, w)
                if t_new < dist[ny, nx]:
                    dist[ny, nx] = t_new
                    flags[ny, nx] = _BAND
                    heapq.heappush(heap, (t_new, ny, nx))
    return img


def _solve_t(dist: np.ndarray, flags: np.ndarray, y: int, x: int, h: int, w: int) -> float:
    def finalized(ny: int, nx: int) -> float:
        if 0 <= ny < h and 0 <= nx < w and flags[ny, nx] == _KNOWN:
            return dist[ny, nx]
        return math.inf

    ty = min(finalized(y - 1, x), finalized(y + 1, x))
    tx = min(finalized(y, x - 1), finalized(y, x + 1))
    return _eikonal(ty, tx)


def _front_normal(dist: np.ndarray, flags: np.ndarray, y: int, x: int, h: int, w: int):
    """Gradient of the distance field at (y, x) from finalized neighbors."""

    def t_at(ny: int, nx: int) -> float:
        if 0 <= ny < h and 0 <= nx < w and flags[ny, nx] != _INSIDE and math.isfinite(dist[ny, nx]):
            return dist[ny, nx]
        return math.nan

    def diff(tm: float, t0: float, tp: float) -> float:
        if not math.isnan(tm) and not math.isnan(tp):
            return 0.5 * (tp - tm)
        if not math.isnan(tp):
            return tp - t0
        if not math.isnan(tm):
            return t0 - tm
        return 0.0

    t0 = dist[y, x] if math.isfinite(dist[y, x]) else 0.0
    gy = diff(t_at(y - 1, x), t0, t_at(y + 1, x))
    gx = diff(t_at(y, x - 1), t0, t_at(y, x + 1))
    norm = math.hypot(gy, gx)
    if norm == 0.0:
        return 0.0, 0.0
    return gy / norm, gx / norm


def _inpaint_pixel(
    img: np.ndarray,
    flags: np.ndarray,
    dist: np.ndarray,
    y: int,
    x: int,
    radius: int,
    h: int,
    w: int,
) -> float:
    ny_g, nx_g = _front_normal(dist, flags, y, x, h, w)
    tp = dist[y, x]
    num = 0.0
    den = 0.0
    r2 = radius * radius
    for qy in range(max(0, y - radius), min(h, y + radius + 1)):
        for qx in range(max(0, x - radius), min(w, x + radius + 1)):
            if flags[qy, qx] != _KNOWN:
                continue
            vy, vx = y - qy, x - qx
            d2 = vy * vy + vx * vx
            if d2 == 0 or d2 > r2:
                continue
            d = math.sqrt(d2)
            direction = abs(vy * ny_g + vx * nx_g) / d
            if direction == 0.0:
                direction = 1e-6
            dst = 1.0 / d2
            lev = 1.0 / (1.0 + abs(tp - dist[qy, qx]))
            wgt = direction * dst * lev
            num += wgt * img[qy, qx]
            den += wgt
    if den == 0.0:
        # No known pixel in range (radius smaller than hole thickness); fall
        # back to the nearest finalized 4-neighbor average.
        vals = []
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ay, ax = y + dy, x + dx
            if 0 <= ay < h and 0 <= ax < w and flags[ay, ax] == _KNOWN:
                vals.append(img[ay, ax])
        return float(np.mean(vals)) if vals else 0.0
    return num / den
