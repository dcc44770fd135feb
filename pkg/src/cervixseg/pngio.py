"""8-bit PNG helpers shared by the dataset, service, and report writers."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def save_gray_png(image01: np.ndarray, path) -> None:
    """Write a [0, 1] float image as an 8-bit grayscale PNG."""
    arr = np.clip(np.asarray(image01, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)


def load_gray_png(path) -> np.ndarray:
    """Read an image file as a [0, 1] float grayscale array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def load_rgb_png(path) -> np.ndarray:
    """Read an image file as an (H, W, 3) float array in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_mask_png(mask: np.ndarray, path) -> None:
    """Write a {0, 1} mask as a {0, 255} 8-bit PNG."""
    arr = (np.asarray(mask) > 0).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def load_mask_png(path) -> np.ndarray:
    """Read a mask PNG back to {0, 1} uint8."""
    with Image.open(path) as im:
        return (np.asarray(im.convert("L")) > 127).astype(np.uint8)


def mask_png_bytes(mask: np.ndarray) -> bytes:
    """PNG-encode a {0, 1} mask; the single encode path used everywhere."""
    buf = io.BytesIO()
    arr = (np.asarray(mask) > 0).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_rgb_png(image: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 array as PNG."""
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path)


def png_size(path) -> tuple[int, int]:
    """(width, height) of an image file without decoding pixel data."""
    with Image.open(Path(path)) as im:
        return im.size
