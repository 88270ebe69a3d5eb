"""Input validation helpers for the public estimator surface."""

from __future__ import annotations

import numpy as np

from .errors import NotFittedError, ShapeError


def check_image(image) -> np.ndarray:
    """Validate an RGB image argument: H x W x 3 (or 3 x H x W) uint8/float."""
    arr = np.asarray(image)
    if arr.ndim != 3 or 3 not in (arr.shape[0], arr.shape[-1]):
        raise ShapeError(f"expected an RGB image array, got shape {arr.shape}")
    if arr.dtype not in (np.uint8, np.float32, np.float64):
        raise ShapeError(f"unsupported image dtype {arr.dtype}; use uint8 or float")
    if np.issubdtype(arr.dtype, np.floating):
        if not np.all(np.isfinite(arr)):
            raise ShapeError("image contains NaN/Inf values")
        if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
            raise ShapeError("float images must be scaled to [0, 1]")
    return arr


def check_class_names(names) -> list[str]:
    if isinstance(names, str):
        raise ShapeError("class names must be a sequence of strings, not a single string")
    names = list(names)
    if not names:
        raise ShapeError("need at least one class name")
    if not all(isinstance(n, str) and n.strip() for n in names):
        raise ShapeError("class names must be non-empty strings")
    return names


def check_is_fitted(estimator, attribute: str = "classes_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit(class_names) first"
        )
