"""Gaussian neighbourhood prior over the patch grid.

The prior is an unnormalized isotropic Gaussian bump (covariance sigma^2 * I)
evaluated in patch-index coordinates (unit spacing between adjacent patches,
not pixels).  Windows at off-center patches are plain truncations of the
kernel; they are deliberately not renormalized.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ParameterError


def _check_sigma(sigma: float) -> float:
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    return float(sigma)


def phi(x, mu, sigma: float) -> float:
    """exp(-||x - mu||^2 / (2 sigma^2)) for 2-d points x, mu."""
    _check_sigma(sigma)
    dx = float(x[0]) - float(mu[0])
    dy = float(x[1]) - float(mu[1])
    return math.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))


def omega(center: tuple[int, int], grid: tuple[int, int], sigma: float) -> np.ndarray:
    """Discretized kernel window: an h x w array peaking at `center`.

    omega[m, n] = phi((m, n); center, sigma); the peak value is exactly 1.
    """
    _check_sigma(sigma)
    h, w = grid
    i, j = center
    if not (0 <= i < h and 0 <= j < w):
        raise ParameterError(f"center {center} outside grid {grid}")
    mm = np.arange(h, dtype=np.float64)[:, None] - i
    nn = np.arange(w, dtype=np.float64)[None, :] - j
    window = np.exp(-(mm * mm + nn * nn) / (2.0 * sigma * sigma))
    return window.astype(np.float32)


class PriorTensor:
    """All windows of one grid at once: values[i, j, m, n] = omega((i,j))[m, n].

    Symmetric under (i,j) <-> (m,n) because the kernel depends only on the
    Euclidean distance.  Built once per (h, w, sigma) and reused across all
    sliding windows of a run; immutable after construction.
    """

    def __init__(self, h: int, w: int, sigma: float):
        _check_sigma(sigma)
        if h < 1 or w < 1:
            raise ParameterError(f"grid must be at least 1x1, got {h}x{w}")
        self.h = h
        self.w = w
        self.sigma = float(sigma)
        # separable: exp(-((i-m)^2+(j-n)^2)/2s^2) = row_term[i,m] * col_term[j,n]
        ii = np.arange(h, dtype=np.float64)
        jj = np.arange(w, dtype=np.float64)
        row = np.exp(-np.square(ii[:, None] - ii[None, :]) / (2.0 * sigma * sigma))
        col = np.exp(-np.square(jj[:, None] - jj[None, :]) / (2.0 * sigma * sigma))
        self.values = np.einsum("im,jn->ijmn", row, col).astype(np.float32)
        self.values.setflags(write=False)

    def window(self, i: int, j: int) -> np.ndarray:
        return self.values[i, j]

    def flat(self) -> np.ndarray:
        """(hw) x (hw) view with both axes in row-major (i*w + j) order."""
        n = self.h * self.w
        return self.values.reshape(n, n)


@lru_cache(maxsize=16)
def prior_tensor(h: int, w: int, sigma: float) -> PriorTensor:
    """Cached PriorTensor for the given grid and kernel width."""
    return PriorTensor(h, w, sigma)


def neighbourhood_radius(sigma: float, tau: float) -> float:
    """Radius within which the kernel exceeds tau: sigma * sqrt(-2 ln tau)."""
    _check_sigma(sigma)
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    return float(sigma) * math.sqrt(-2.0 * math.log(tau))


def count_boosted_patches(sigma: float, tau: float) -> int:
    """Number of lattice points whose kernel value exceeds tau, on an infinite grid.

    Counts integer offsets (m, n) with m^2 + n^2 strictly below the squared
    radius; the center itself is included.
    """
    r = neighbourhood_radius(sigma, tau)
    r_sq = r * r
    bound = math.ceil(r)
    count = 0
    for m in range(-bound, bound + 1):
        for n in range(-bound, bound + 1):
            if m * m + n * n < r_sq:
                count += 1
    return count
