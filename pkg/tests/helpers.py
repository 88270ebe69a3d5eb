"""Shared test fixtures: random tiny weights in manifest form."""

from __future__ import annotations

import numpy as np

from naseg.config import TextConfig, VisionConfig

TINY_VISION = VisionConfig(patch_size=32, depth=2, width=8, heads=2, output_dim=6)
TINY_TEXT = TextConfig(width=8, depth=2, heads=2, output_dim=6, vocab_size=525, context_length=16)


def random_named_tensors(manifest: dict[str, tuple[int, ...]], seed: int = 0,
                         scale: float = 0.25) -> dict[str, np.ndarray]:
    """Random tensors for every manifest entry, gains near 1 and biases small."""
    rng = np.random.default_rng(seed)
    out = {}
    for name, shape in manifest.items():
        if name.endswith(".gain"):
            arr = 1.0 + 0.1 * rng.standard_normal(shape)
        elif name.endswith(".bias") or name.endswith("class_embedding"):
            arr = 0.05 * rng.standard_normal(shape)
        else:
            arr = scale * rng.standard_normal(shape)
        out[name] = arr.astype(np.float32)
    return out


def random_attention_weights(rng: np.random.Generator, width: int):
    from naseg.attention import AttentionWeights

    return AttentionWeights(
        w_qkv=(0.3 * rng.standard_normal((width, 3 * width))).astype(np.float32),
        b_qkv=(0.05 * rng.standard_normal(3 * width)).astype(np.float32),
        w_out=(0.3 * rng.standard_normal((width, width))).astype(np.float32),
        b_out=(0.05 * rng.standard_normal(width)).astype(np.float32),
    )


def random_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Synthetic uint8 RGB image with smooth structure plus noise."""
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    base = np.stack([
        0.5 + 0.4 * np.sin(6 * xx + 2 * yy),
        0.5 + 0.4 * np.cos(4 * yy),
        0.5 + 0.4 * np.sin(3 * xx * yy + 1.0),
    ])
    noise = 0.05 * rng.standard_normal((3, h, w))
    img = np.clip(base + noise, 0, 1)
    return (img.transpose(1, 2, 0) * 255).astype(np.uint8)
