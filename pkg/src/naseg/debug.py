"""Attention-map inspection: render per-patch maps as a tiled grayscale image."""

from __future__ import annotations

import numpy as np

from .attention import AttentionConfig, attention_maps
from .config import VisionConfig
from .encoder import VisualWeights, trunk_tokens
from .numerics import Tensor, layer_norm
from .prior import prior_tensor


def final_block_attention(window: Tensor, visual: VisualWeights, vision_cfg: VisionConfig,
                          attn_cfg: AttentionConfig, attn_scope: str = "last") -> Tensor:
    """Row-stochastic maps [heads, hw, hw] of the final block over patch tokens."""
    grid = vision_cfg.grid
    prior = prior_tensor(grid, grid, attn_cfg.sigma) if attn_cfg.needs_prior else None
    z = trunk_tokens(window, visual, vision_cfg, attn_cfg, attn_scope, prior)
    final = visual.blocks[-1]
    normed = layer_norm(z, final.ln1_gain, final.ln1_bias)
    return attention_maps(normed[1:], final.attn, attn_cfg, prior)


def attention_grid_image(maps: Tensor, h: int, w: int) -> np.ndarray:
    """Tile every query patch's head-averaged map into one (h*h) x (w*w) image.

    The cell at block-position (i, j) shows where patch (i, j) attends;
    each cell is scaled independently to use the full gray range.
    """
    mean_map = np.asarray(maps).mean(axis=0).reshape(h, w, h, w)
    out = np.zeros((h * h, w * w), dtype=np.uint8)
    for i in range(h):
        for j in range(w):
            cell = mean_map[i, j]
            peak = float(cell.max())
            if peak > 0:
                cell = cell / peak
            out[i * h:(i + 1) * h, j * w:(j + 1) * w] = (cell * 255).astype(np.uint8)
    return out
