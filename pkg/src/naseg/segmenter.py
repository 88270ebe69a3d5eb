"""Image -> mask pipeline: resize, sliding windows, cosine logits, fusion, PAMR.

Conventions fixed here:

* overlapping windows are fused by the arithmetic mean of their logits
  (coverage-normalized sums);
* edge windows clamp flush to the image boundary instead of padding;
* PAMR runs on per-pixel softmax probabilities at the resized resolution,
  before the argmax and before mapping back to the input resolution;
* argmax ties break toward the lowest class index;
* the final mask is resized back with nearest-neighbour (class indices are
  categorical).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import IMAGE_MEAN, IMAGE_STD, VisionConfig
from .encoder import FeatureGrid, VisualWeights, forward_features
from .attention import AttentionConfig
from .errors import ConfigError, ShapeError
from .numerics import Tensor, as_tensor, bilinear_resize, l2_normalize_rows, matmul, nearest_resize
from .text import ClassEmbeddingSet


@dataclass(frozen=True)
class SlidingConfig:
    window: int = 224
    stride: int = 112
    short_side: int = 336

    def __post_init__(self):
        if self.stride > self.window:
            raise ConfigError(f"stride {self.stride} exceeds window {self.window}")
        if self.short_side < self.window:
            raise ConfigError(f"short side {self.short_side} below window {self.window}")
        if min(self.window, self.stride) < 1:
            raise ConfigError("window and stride must be positive")


@dataclass(frozen=True)
class PamrConfig:
    iterations: int = 10
    dilations: tuple[int, ...] = (1, 2, 4, 8, 12, 24)
    enabled: bool = True

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.enabled and self.iterations > 0 and not self.dilations:
            raise ConfigError("need at least one dilation")


def to_chw_float(image: np.ndarray) -> Tensor:
    """Accept H x W x 3 uint8 (or float in [0, 1]) or 3 x H x W float; emit the latter."""
    image = np.asarray(image)
    if image.ndim != 3:
        raise ShapeError(f"expected an RGB image, got shape {image.shape}")
    if image.shape[-1] == 3 and image.shape[0] != 3:
        image = image.transpose(2, 0, 1)
    if image.shape[0] != 3:
        raise ShapeError(f"cannot interpret shape {image.shape} as RGB")
    if image.dtype == np.uint8:
        return (image.astype(np.float32) / 255.0)
    return as_tensor(image)


def normalize_image(image: Tensor, mean=IMAGE_MEAN, std=IMAGE_STD) -> Tensor:
    """Channel-standardize a 3 x H x W image already scaled to [0, 1]."""
    mean = np.asarray(mean, dtype=np.float32)[:, None, None]
    std = np.asarray(std, dtype=np.float32)[:, None, None]
    return ((image - mean) / std).astype(np.float32)


def resize_short_side(image: Tensor, short_side: int) -> Tensor:
    """Aspect-preserving bilinear resize so that min(H, W) == short_side."""
    _, h, w = image.shape
    if h <= w:
        out_h = short_side
        out_w = max(short_side, round(w * short_side / h))
    else:
        out_w = short_side
        out_h = max(short_side, round(h * short_side / w))
    return bilinear_resize(image, out_h, out_w)


def tile_origins(length: int, window: int, stride: int) -> list[int]:
    """Window start offsets along one axis, final window clamped flush to the edge."""
    if length < window:
        raise ShapeError(f"extent {length} smaller than window {window}")
    origins = list(range(0, length - window + 1, stride))
    if origins[-1] + window < length:
        origins.append(length - window)
    return origins


def resize_and_tile(image: Tensor, cfg: SlidingConfig) -> list[tuple[Tensor, tuple[int, int]]]:
    """Resize to the working resolution and enumerate all (window, origin) pairs."""
    resized = resize_short_side(to_chw_float(image), cfg.short_side)
    _, h, w = resized.shape
    out = []
    for oy in tile_origins(h, cfg.window, cfg.stride):
        for ox in tile_origins(w, cfg.window, cfg.stride):
            out.append((resized[:, oy:oy + cfg.window, ox:ox + cfg.window], (oy, ox)))
    return out


def window_logits(fg: FeatureGrid, classes: ClassEmbeddingSet, temperature: float = 100.0) -> Tensor:
    """Per-class cosine similarity map over the patch grid, scaled by temperature.

    The argmax is invariant to the (positive) temperature; it only matters
    when the logits are softmaxed, e.g. before PAMR.
    """
    if fg.embeddings.shape[1] != classes.matrix.shape[1]:
        raise ShapeError(
            f"feature dim {fg.embeddings.shape[1]} != class embedding dim {classes.matrix.shape[1]}"
        )
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    feats = l2_normalize_rows(fg.embeddings)
    cos = matmul(feats, classes.matrix.T)  # hw x C
    maps = cos.T.reshape(classes.num_classes, fg.h, fg.w)
    return (maps * np.float32(temperature)).astype(np.float32)


class LogitVolume:
    """Coverage-counted accumulator for overlapping window logits.

    Windows may be computed concurrently, but calls into one volume must be
    serialized by the caller; the finalized array is a fresh immutable copy.
    """

    def __init__(self, num_classes: int, height: int, width: int):
        self.sums = np.zeros((num_classes, height, width), dtype=np.float32)
        self.coverage = np.zeros((height, width), dtype=np.float32)

    def accumulate(self, logits: Tensor, origin: tuple[int, int], window: int) -> "LogitVolume":
        """Bilinearly upsample a window's class maps and add them at `origin`."""
        oy, ox = origin
        _, height, width = self.sums.shape
        if oy < 0 or ox < 0 or oy + window > height or ox + window > width:
            raise ShapeError(f"window at {origin} (size {window}) outside volume {height}x{width}")
        up = bilinear_resize(logits, window, window)
        self.sums[:, oy:oy + window, ox:ox + window] += up
        self.coverage[oy:oy + window, ox:ox + window] += 1.0
        return self

    def finalize(self, strict: bool = True) -> Tensor:
        """Mean of accumulated logits; with strict=True, uncovered pixels are an error."""
        if strict and not np.all(self.coverage >= 1):
            raise ShapeError("logit volume has uncovered pixels")
        return (self.sums / np.maximum(self.coverage, 1.0)[None, :, :]).astype(np.float32)


def _shift_clamped(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """arr sampled at (y + dy, x + dx) with out-of-range coordinates clamped."""
    h, w = arr.shape[-2:]
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return arr[..., ys, :][..., :, xs]


_NEIGHBOUR_OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


def pamr_affinities(image: Tensor, dilations: tuple[int, ...]) -> tuple[Tensor, list[tuple[int, int]]]:
    """Per-pixel softmax weights over every dilated 3x3 neighbour.

    The affinity logit for neighbour q of pixel p is the negated mean
    absolute channel difference |I(p) - I(q)|, normalized by the per-pixel
    standard deviation of those differences; a flat image therefore yields
    uniform weights.
    """
    offsets = [(d * dy, d * dx) for d in dilations for dy, dx in _NEIGHBOUR_OFFSETS]
    diffs = np.stack([
        np.abs(image - _shift_clamped(image, dy, dx)).mean(axis=0) for dy, dx in offsets
    ])  # K x H x W
    std = diffs.std(axis=0, keepdims=True)
    logits = -diffs / (std + np.float32(1e-8))
    logits -= logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    weights = e / e.sum(axis=0, keepdims=True)
    return weights.astype(np.float32), offsets


def pamr_refine(image: Tensor, probs: Tensor, cfg: PamrConfig) -> Tensor:
    """Iteratively replace each pixel's scores by the affinity-weighted neighbour average.

    Weights are convex per pixel, so nonnegativity and (for per-pixel
    normalized inputs) unit sums are preserved.  iterations=0 is the identity.
    """
    probs = as_tensor(probs)
    if not cfg.enabled or cfg.iterations == 0:
        return probs.copy()
    if np.any(probs < 0):
        raise ShapeError("pamr_refine expects nonnegative scores")
    image = as_tensor(image)
    if image.shape[-2:] != probs.shape[-2:]:
        raise ShapeError(f"image {image.shape} and scores {probs.shape} disagree spatially")
    weights, offsets = pamr_affinities(image, cfg.dilations)
    for _ in range(cfg.iterations):
        mixed = np.zeros_like(probs)
        for k, (dy, dx) in enumerate(offsets):
            mixed += weights[k][None, :, :] * _shift_clamped(probs, dy, dx)
        probs = mixed
    return probs.astype(np.float32)


def _softmax_classes(volume: Tensor) -> Tensor:
    shifted = volume - volume.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=0, keepdims=True)).astype(np.float32)


@dataclass
class SegmentationResult:
    mask: np.ndarray                 # H x W int32 class indices
    volume: Tensor | None = None     # C x H' x W' fused logits (optional)
    resized_shape: tuple[int, int] = (0, 0)


def segment(image: np.ndarray, classes: ClassEmbeddingSet, visual: VisualWeights,
            vision_cfg: VisionConfig, attn_cfg: AttentionConfig, arch: str = "reduced",
            sliding: SlidingConfig = SlidingConfig(), pamr: PamrConfig = PamrConfig(),
            temperature: float = 100.0, image_mean=IMAGE_MEAN, image_std=IMAGE_STD,
            attn_scope: str = "last", return_volume: bool = False) -> SegmentationResult:
    """Full pipeline from an RGB image to a class-index mask at input resolution."""
    if classes.num_classes < 1:
        raise ConfigError("empty class set")
    if sliding.window != vision_cfg.input_side:
        raise ConfigError(
            f"window {sliding.window} must equal the encoder input side {vision_cfg.input_side}"
        )
    chw = to_chw_float(image)
    orig_h, orig_w = chw.shape[1], chw.shape[2]
    resized = resize_short_side(chw, sliding.short_side)
    normalized = normalize_image(resized, image_mean, image_std)
    _, height, width = resized.shape

    volume = LogitVolume(classes.num_classes, height, width)
    for oy in tile_origins(height, sliding.window, sliding.stride):
        for ox in tile_origins(width, sliding.window, sliding.stride):
            win = normalized[:, oy:oy + sliding.window, ox:ox + sliding.window]
            fg = forward_features(win, visual, vision_cfg, attn_cfg, arch, attn_scope)
            volume.accumulate(window_logits(fg, classes, temperature), (oy, ox), sliding.window)
    fused = volume.finalize(strict=True)

    if pamr.enabled and pamr.iterations > 0:
        decision = pamr_refine(resized, _softmax_classes(fused), pamr)
    else:
        decision = fused
    mask_small = decision.argmax(axis=0).astype(np.int32)
    mask = nearest_resize(mask_small, orig_h, orig_w)
    return SegmentationResult(
        mask=mask,
        volume=fused if return_volume else None,
        resized_shape=(height, width),
    )
