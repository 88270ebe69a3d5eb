"""PNG/JPEG image and mask IO plus overlay rendering."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError


def load_image(path: str | Path) -> np.ndarray:
    """8-bit RGB image as an H x W x 3 uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def load_mask(path: str | Path) -> np.ndarray:
    """Single-channel index mask as an H x W integer array."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        raise ConfigError(f"{path}: expected a single-channel index mask, got {arr.shape}")
    return arr.astype(np.int64)


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.min() < 0 or mask.max() > 255:
        raise ConfigError("mask indices must fit in a single PNG channel (0..255)")
    Image.fromarray(mask.astype(np.uint8), mode="L").save(path)


def default_palette(num_classes: int) -> np.ndarray:
    """The classic bit-interleaved segmentation palette, C x 3 uint8."""
    palette = np.zeros((num_classes, 3), dtype=np.uint8)
    for idx in range(num_classes):
        label = idx
        r = g = b = 0
        for shift in range(8):
            r |= ((label >> 0) & 1) << (7 - shift)
            g |= ((label >> 1) & 1) << (7 - shift)
            b |= ((label >> 2) & 1) << (7 - shift)
            label >>= 3
        palette[idx] = (r, g, b)
    return palette


def load_palette(path: str | Path) -> np.ndarray:
    """Palette file: one 'R G B' (or comma-separated) triplet per line."""
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().replace(",", " ")
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError(f"{path}: palette line {line!r} is not an RGB triplet")
        rows.append([int(p) for p in parts])
    if not rows:
        raise ConfigError(f"{path}: palette file is empty")
    return np.asarray(rows, dtype=np.uint8)


def save_overlay(path: str | Path, image: np.ndarray, mask: np.ndarray,
                 palette: np.ndarray | None = None, alpha: float = 0.5) -> None:
    """Blend class colors over the image and save as RGB PNG."""
    image = np.asarray(image, dtype=np.float32)
    mask = np.asarray(mask)
    if palette is None:
        palette = default_palette(int(mask.max()) + 1)
    if int(mask.max()) >= len(palette):
        raise ConfigError(f"palette has {len(palette)} colors but mask uses index {int(mask.max())}")
    colors = palette[mask].astype(np.float32)
    blended = np.clip((1 - alpha) * image + alpha * colors, 0, 255).astype(np.uint8)
    Image.fromarray(blended, mode="RGB").save(path)
