"""CLIP-style vision transformer with a configurable final block.

Blocks 1..L-1 are always the standard pre-norm residual blocks.  The final
block is the configuration surface:

* arch "vanilla" + variant "vanilla": unchanged encoder block (the baseline),
* arch "vanilla" + any other variant: residual/MLP structure kept, attention
  swapped for the modified variant computed over patch tokens only,
* arch "reduced": the block collapses to SA(LN(Z)) over patch tokens, with
  no skip connection and no feed-forward, attention per the configured variant.

The class token never takes part in modified attention (the spatial prior is
undefined for it) and its output is discarded: every downstream consumer
works on the per-patch feature grid.  Spatial indexing convention: patch
(i, j) of an h x w grid lives at row i * w + j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .attention import AttentionConfig, AttentionWeights, self_attention
from .config import VisionConfig
from .errors import ConfigError, ShapeError
from .numerics import Tensor, layer_norm, matmul, quick_gelu
from .prior import PriorTensor, prior_tensor

ARCHS = ("vanilla", "reduced")


@dataclass(frozen=True)
class EncoderBlockWeights:
    ln1_gain: Tensor
    ln1_bias: Tensor
    attn: AttentionWeights
    ln2_gain: Tensor
    ln2_bias: Tensor
    fc1_weight: Tensor  # D x 4D
    fc1_bias: Tensor
    fc2_weight: Tensor  # 4D x D
    fc2_bias: Tensor


@dataclass(frozen=True)
class VisualWeights:
    patch_weight: Tensor  # (3 P^2) x D
    patch_bias: Tensor
    class_embedding: Tensor
    pos_embedding: Tensor  # (1 + hw) x D
    ln_pre_gain: Tensor
    ln_pre_bias: Tensor
    blocks: tuple[EncoderBlockWeights, ...]
    ln_post_gain: Tensor
    ln_post_bias: Tensor
    proj: Tensor  # D x D_out

    @classmethod
    def from_tensors(cls, t, cfg: VisionConfig) -> "VisualWeights":
        """Assemble from a validated name -> tensor mapping (see weights.validate)."""
        blocks = tuple(
            _block_from_tensors(t, f"visual.blocks.{i}") for i in range(cfg.depth)
        )
        return cls(
            patch_weight=t["visual.patch_embed.weight"],
            patch_bias=t["visual.patch_embed.bias"],
            class_embedding=t["visual.class_embedding"],
            pos_embedding=t["visual.pos_embedding"],
            ln_pre_gain=t["visual.ln_pre.gain"],
            ln_pre_bias=t["visual.ln_pre.bias"],
            blocks=blocks,
            ln_post_gain=t["visual.ln_post.gain"],
            ln_post_bias=t["visual.ln_post.bias"],
            proj=t["visual.proj"],
        )


def _block_from_tensors(t, prefix: str) -> EncoderBlockWeights:
    return EncoderBlockWeights(
        ln1_gain=t[f"{prefix}.ln1.gain"],
        ln1_bias=t[f"{prefix}.ln1.bias"],
        attn=AttentionWeights(
            w_qkv=t[f"{prefix}.attn.qkv.weight"],
            b_qkv=t[f"{prefix}.attn.qkv.bias"],
            w_out=t[f"{prefix}.attn.out.weight"],
            b_out=t[f"{prefix}.attn.out.bias"],
        ),
        ln2_gain=t[f"{prefix}.ln2.gain"],
        ln2_bias=t[f"{prefix}.ln2.bias"],
        fc1_weight=t[f"{prefix}.mlp.fc1.weight"],
        fc1_bias=t[f"{prefix}.mlp.fc1.bias"],
        fc2_weight=t[f"{prefix}.mlp.fc2.weight"],
        fc2_bias=t[f"{prefix}.mlp.fc2.bias"],
    )


@dataclass
class FeatureGrid:
    """Per-patch output embeddings, spatially indexed: (i, j) <-> row i*w + j."""

    h: int
    w: int
    embeddings: Tensor  # hw x D_out


def patchify(image: Tensor, patch_size: int) -> Tensor:
    """Split 3 x S x S into hw rows of flattened patches, channel-major per patch."""
    image = numerics.as_tensor(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"expected 3 x S x S image, got {image.shape}")
    _, height, width = image.shape
    if height % patch_size or width % patch_size:
        raise ShapeError(f"image {height}x{width} not divisible by patch size {patch_size}")
    h, w = height // patch_size, width // patch_size
    patches = image.reshape(3, h, patch_size, w, patch_size)
    patches = patches.transpose(1, 3, 0, 2, 4)  # h, w, c, py, px
    return np.ascontiguousarray(patches.reshape(h * w, 3 * patch_size * patch_size))


def embed_patches(image: Tensor, weights: VisualWeights, cfg: VisionConfig) -> Tensor:
    """Patch projection with class token prepended and positional embeddings added."""
    image = numerics.as_tensor(image)
    expected = (3, cfg.input_side, cfg.input_side)
    if image.shape != expected:
        raise ShapeError(f"expected image of shape {expected}, got {image.shape}")
    rows = matmul(patchify(image, cfg.patch_size), weights.patch_weight) + weights.patch_bias
    tokens = np.concatenate([weights.class_embedding[None, :], rows], axis=0)
    if weights.pos_embedding.shape != tokens.shape:
        raise ShapeError(
            f"positional embedding {weights.pos_embedding.shape} does not match tokens {tokens.shape}"
        )
    return (tokens + weights.pos_embedding).astype(np.float32)


def _mlp(x: Tensor, bw: EncoderBlockWeights) -> Tensor:
    hidden = quick_gelu(matmul(x, bw.fc1_weight) + bw.fc1_bias)
    return matmul(hidden, bw.fc2_weight) + bw.fc2_bias


def encoder_block(z: Tensor, bw: EncoderBlockWeights, cfg: AttentionConfig,
                  prior: PriorTensor | None = None) -> Tensor:
    """Standard pre-norm residual block: attention then feed-forward."""
    attended = self_attention(layer_norm(z, bw.ln1_gain, bw.ln1_bias), bw.attn, cfg, prior)
    z = z + attended
    z = z + _mlp(layer_norm(z, bw.ln2_gain, bw.ln2_bias), bw)
    return z.astype(np.float32)


def reduced_final_block(z: Tensor, bw: EncoderBlockWeights, cfg: AttentionConfig,
                        prior: PriorTensor | None = None) -> Tensor:
    """SA(LN(Z)) over patch tokens: no residual, no feed-forward, class row dropped."""
    if z.ndim != 2 or z.shape[0] < 2:
        raise ShapeError(f"expected (1 + hw) x D tokens, got {z.shape}")
    normed = layer_norm(z, bw.ln1_gain, bw.ln1_bias)
    return self_attention(normed[1:], bw.attn, cfg, prior)


def _modified_vanilla_arch_block(z: Tensor, bw: EncoderBlockWeights, cfg: AttentionConfig,
                                 prior: PriorTensor | None) -> Tensor:
    # residual structure intact, but attention runs over patch tokens only
    zp = z[1:]
    attended = self_attention(layer_norm(zp, bw.ln1_gain, bw.ln1_bias), bw.attn, cfg, prior)
    zp = zp + attended
    zp = zp + _mlp(layer_norm(zp, bw.ln2_gain, bw.ln2_bias), bw)
    return zp.astype(np.float32)


def _check_forward_args(cfg: VisionConfig, attn_cfg: AttentionConfig, arch: str, attn_scope: str):
    if arch not in ARCHS:
        raise ConfigError(f"unknown architecture {arch!r}; expected one of {ARCHS}")
    if attn_scope not in ("last", "all"):
        raise ConfigError(f"attn_scope must be 'last' or 'all', got {attn_scope!r}")
    if attn_cfg.width != cfg.width:
        raise ConfigError(
            f"attention config width {attn_cfg.width} does not match model width {cfg.width}"
        )


def trunk_tokens(image: Tensor, weights: VisualWeights, cfg: VisionConfig,
                 attn_cfg: AttentionConfig, attn_scope: str = "last",
                 prior: PriorTensor | None = None) -> Tensor:
    """Token states after embedding and blocks 1..L-1 (input to the final block)."""
    vanilla_cfg = AttentionConfig(variant="vanilla", num_heads=cfg.heads, head_dim=cfg.head_dim)
    z = embed_patches(image, weights, cfg)
    z = layer_norm(z, weights.ln_pre_gain, weights.ln_pre_bias)
    for bw in weights.blocks[:-1]:
        if attn_scope == "all" and attn_cfg.variant != "vanilla":
            zp = _modified_vanilla_arch_block(z, bw, attn_cfg, prior)
            cls_row = z[:1] + _mlp(layer_norm(z[:1], bw.ln2_gain, bw.ln2_bias), bw)
            z = np.concatenate([cls_row, zp], axis=0).astype(np.float32)
        else:
            z = encoder_block(z, bw, vanilla_cfg)
    return z


def forward_features(image: Tensor, weights: VisualWeights, cfg: VisionConfig,
                     attn_cfg: AttentionConfig, arch: str = "reduced",
                     attn_scope: str = "last") -> FeatureGrid:
    """Full visual forward pass producing the projected per-patch feature grid.

    ``attn_scope`` is experimental: "last" (default) modifies only the final
    block's attention; "all" applies the modified variant in every block
    (class rows then bypass attention and ride the residuals).
    """
    _check_forward_args(cfg, attn_cfg, arch, attn_scope)
    grid = cfg.grid
    prior = prior_tensor(grid, grid, attn_cfg.sigma) if attn_cfg.needs_prior else None
    vanilla_cfg = AttentionConfig(variant="vanilla", num_heads=cfg.heads, head_dim=cfg.head_dim)

    z = trunk_tokens(image, weights, cfg, attn_cfg, attn_scope, prior)

    final = weights.blocks[-1]
    if arch == "reduced":
        patches = reduced_final_block(z, final, attn_cfg, prior)
    elif attn_cfg.variant == "vanilla":
        patches = encoder_block(z, final, vanilla_cfg)[1:]
    else:
        patches = _modified_vanilla_arch_block(z, final, attn_cfg, prior)

    projected = matmul(layer_norm(patches, weights.ln_post_gain, weights.ln_post_bias), weights.proj)
    return FeatureGrid(h=grid, w=grid, embeddings=projected)
