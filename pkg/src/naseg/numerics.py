"""Minimal dense-tensor kernels: matmul, layer norm, activation, softmax, resize.

All operations take and return contiguous row-major float32 numpy arrays
("tensors") and are pure functions: no shared mutable state, safe to call
concurrently.  Every public operation checks that its result is finite;
a NaN/Inf anywhere is treated as an error, never propagated silently.

Accumulation precision: `matmul` uses BLAS sgemm, i.e. fp32 accumulation.
`layer_norm` reduces in fp32.  `bilinear_resize` uses half-pixel source
centers (align_corners=false convention); mIoU is sensitive to this choice,
so it is fixed here and not configurable.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

Tensor = np.ndarray


def as_tensor(x) -> Tensor:
    """Coerce to a contiguous float32 array."""
    return np.ascontiguousarray(x, dtype=np.float32)


def check_finite(x: Tensor, what: str = "tensor") -> Tensor:
    if not np.all(np.isfinite(x)):
        raise ShapeError(f"{what} contains NaN/Inf values")
    return x


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product a @ b with fp32 accumulation."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each trailing-axis vector to mean 0 / variance 1, then scale and shift.

    Variance is the biased (population) estimate, matching the usual
    transformer convention; eps is added inside the square root.
    """
    x = as_tensor(x)
    gamma = as_tensor(gamma)
    beta = as_tensor(beta)
    if x.shape[-1] == 0:
        raise ShapeError("layer_norm over a zero-length vector")
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(
            f"gamma/beta must have shape ({x.shape[-1]},), got {gamma.shape} and {beta.shape}"
        )
    if eps <= 0:
        raise ShapeError("layer_norm eps must be positive")
    mu = x.mean(axis=-1, keepdims=True)
    var = np.square(x - mu).mean(axis=-1, keepdims=True)
    normed = (x - mu) / np.sqrt(var + np.float32(eps))
    return check_finite((normed * gamma + beta).astype(np.float32), "layer_norm result")


def _sigmoid(z: Tensor) -> Tensor:
    # exp only ever sees non-positive arguments, so no overflow
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def quick_gelu(x: Tensor) -> Tensor:
    """x * sigmoid(1.702 x), the activation CLIP-style weights are trained with."""
    x = as_tensor(x)
    return check_finite((x * _sigmoid(np.float32(1.702) * x)).astype(np.float32), "quick_gelu result")


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, stabilized by row-max subtraction."""
    x = as_tensor(x)
    if x.shape[-1] < 1:
        raise ShapeError("softmax over an empty row")
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    return check_finite(out.astype(np.float32), "softmax result")


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Resize a C x h x w tensor with half-pixel-center bilinear interpolation.

    Source coordinate of output pixel i is (i + 0.5) * in/out - 0.5, clamped
    to the valid range; identical sizes reproduce the input exactly.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"bilinear_resize expects C x h x w, got {x.shape}")
    c, h, w = x.shape
    if min(h, w, out_h, out_w) < 1:
        raise ShapeError("bilinear_resize sizes must be >= 1")
    if (out_h, out_w) == (h, w):
        return x.copy()

    def axis_coords(n_in: int, n_out: int):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = (src - lo).astype(np.float32)
        return lo, hi, frac

    y0, y1, fy = axis_coords(h, out_h)
    x0, x1, fx = axis_coords(w, out_w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = x[:, y0][:, :, x0] * (1 - fx) + x[:, y0][:, :, x1] * fx
    bottom = x[:, y1][:, :, x0] * (1 - fx) + x[:, y1][:, :, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return check_finite(out.astype(np.float32), "bilinear_resize result")


def nearest_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Nearest-neighbour resize of an h x w array (used for categorical masks)."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"nearest_resize expects h x w, got {x.shape}")
    h, w = x.shape
    ys = np.clip(np.round((np.arange(out_h) + 0.5) * (h / out_h) - 0.5).astype(np.int64), 0, h - 1)
    xs = np.clip(np.round((np.arange(out_w) + 0.5) * (w / out_w) - 0.5).astype(np.int64), 0, w - 1)
    return x[ys][:, xs]


def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit L2 norm; zero rows are guarded by eps."""
    x = as_tensor(x)
    norms = np.sqrt(np.square(x).sum(axis=-1, keepdims=True))
    return (x / np.maximum(norms, np.float32(eps))).astype(np.float32)
