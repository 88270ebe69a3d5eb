"""Multi-head self-attention with switchable logit definitions.

Four variants are supported:

* ``vanilla``             -- scaled query-key dot products,
* ``kk``                  -- scaled key-key dot products (symmetric logits),
* ``neighbourhood_only``  -- the Gaussian window alone, content-free,
* ``naclip``              -- key-key logits plus the Gaussian window.

The Gaussian window is added *after* the 1/sqrt(d) scaling, identically to
every head, and only over spatial (patch) tokens: callers that carry a class
token must strip it before using a prior-based variant.  All functions are
stateless given (weights, prior) and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ConfigError, ShapeError
from .numerics import Tensor
from .prior import PriorTensor

VARIANTS = ("vanilla", "kk", "neighbourhood_only", "naclip")
_PRIOR_VARIANTS = ("neighbourhood_only", "naclip")


@dataclass(frozen=True)
class AttentionConfig:
    variant: str = "naclip"
    num_heads: int = 12
    head_dim: int = 64
    sigma: float = 5.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown attention variant {self.variant!r}; expected one of {VARIANTS}")
        if self.num_heads < 1 or self.head_dim < 1:
            raise ConfigError("num_heads and head_dim must be >= 1")
        if self.needs_prior and not self.sigma > 0:
            raise ConfigError(f"variant {self.variant!r} requires sigma > 0, got {self.sigma}")

    @property
    def width(self) -> int:
        return self.num_heads * self.head_dim

    @property
    def needs_prior(self) -> bool:
        return self.variant in _PRIOR_VARIANTS


@dataclass(frozen=True)
class AttentionWeights:
    """Fused qkv projection plus output projection, row-major y = x @ W + b."""

    w_qkv: Tensor  # D x 3D
    b_qkv: Tensor  # 3D
    w_out: Tensor  # D x D
    b_out: Tensor  # D

    def check(self, width: int) -> "AttentionWeights":
        expect = {
            "w_qkv": (width, 3 * width),
            "b_qkv": (3 * width,),
            "w_out": (width, width),
            "b_out": (width,),
        }
        for name, shape in expect.items():
            got = getattr(self, name).shape
            if tuple(got) != shape:
                raise ShapeError(f"attention weight {name}: expected {shape}, got {tuple(got)}")
        return self


def project_qkv(z: Tensor, weights: AttentionWeights, num_heads: int):
    """Project tokens to per-head query/key/value stacks of shape [heads, N, d].

    The fused projection output is split channel-wise as [q | k | v]; within
    each third, head ``h`` owns the contiguous slice [h*d, (h+1)*d).
    """
    z = numerics.as_tensor(z)
    if z.ndim != 2:
        raise ShapeError(f"expected tokens of shape N x D, got {z.shape}")
    d_model = z.shape[1]
    if d_model % num_heads != 0:
        raise ShapeError(f"width {d_model} not divisible by {num_heads} heads")
    weights.check(d_model)
    y = numerics.matmul(z, weights.w_qkv) + weights.b_qkv
    n = z.shape[0]
    head_dim = d_model // num_heads

    def split(block: Tensor) -> Tensor:
        return np.ascontiguousarray(
            block.reshape(n, num_heads, head_dim).transpose(1, 0, 2)
        )

    q, k, v = (split(y[:, i * d_model:(i + 1) * d_model]) for i in range(3))
    return q, k, v


def _prior_flat(prior: PriorTensor | None, cfg: AttentionConfig, n_tokens: int) -> Tensor | None:
    if not cfg.needs_prior:
        return None
    if prior is None:
        raise ConfigError(f"variant {cfg.variant!r} requires a neighbourhood prior")
    if prior.h * prior.w != n_tokens:
        raise ShapeError(
            f"prior covers {prior.h}x{prior.w}={prior.h * prior.w} patches but got {n_tokens} tokens"
        )
    return prior.flat()


def logits(q: Tensor, k: Tensor, prior: PriorTensor | None, cfg: AttentionConfig) -> Tensor:
    """Pre-softmax attention logits of shape [heads, N, N]; rows index queries."""
    heads, n, d = q.shape
    if k.shape != q.shape:
        raise ShapeError(f"q and k disagree: {q.shape} vs {k.shape}")
    scale = np.float32(1.0 / np.sqrt(d))
    omega = _prior_flat(prior, cfg, n)

    if cfg.variant == "vanilla":
        sim = np.einsum("hqd,hkd->hqk", q, k) * scale
    elif cfg.variant in ("kk", "naclip"):
        sim = np.einsum("hqd,hkd->hqk", k, k) * scale
    else:  # neighbourhood_only: content logits are identically zero
        sim = np.zeros((heads, n, n), dtype=np.float32)

    if omega is not None:
        sim = sim + omega[None, :, :]
    return numerics.check_finite(sim.astype(np.float32), "attention logits")


def attend(logits_: Tensor, v: Tensor) -> Tensor:
    """Row-softmax the logits and take the weighted sum of values, per head."""
    maps = numerics.softmax_rows(logits_)
    return np.einsum("hqk,hkd->hqd", maps, v).astype(np.float32)


def attention_maps(z: Tensor, weights: AttentionWeights, cfg: AttentionConfig,
                   prior: PriorTensor | None = None) -> Tensor:
    """Row-stochastic attention maps [heads, N, N] for inspection/debug dumps."""
    q, k, _ = project_qkv(z, weights, cfg.num_heads)
    return numerics.softmax_rows(logits(q, k, prior, cfg))


def self_attention(z: Tensor, weights: AttentionWeights, cfg: AttentionConfig,
                   prior: PriorTensor | None = None, mask: Tensor | None = None) -> Tensor:
    """Full multi-head attention: project, score, mix values, merge heads.

    ``mask`` is an optional additive N x N bias applied to every head's
    logits (used for causal text attention); prior-based variants refuse it.
    """
    q, k, v = project_qkv(z, weights, cfg.num_heads)
    sim = logits(q, k, prior, cfg)
    if mask is not None:
        if cfg.needs_prior:
            raise ConfigError("additive masks are only supported for content-based variants")
        sim = sim + numerics.as_tensor(mask)[None, :, :]
    mixed = attend(sim, v)  # heads x N x d
    heads, n, d = mixed.shape
    merged = np.ascontiguousarray(mixed.transpose(1, 0, 2)).reshape(n, heads * d)
    out = numerics.matmul(merged, weights.w_out) + weights.b_out
    return numerics.check_finite(out.astype(np.float32), "self_attention result")
