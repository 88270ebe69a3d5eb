"""Confusion-matrix accumulation and mean-IoU reporting.

Rows index ground truth, columns index predictions.  Pixels whose ground
truth equals the ignore index are skipped.  Classes whose union is zero
(absent from both prediction and ground truth) are excluded from the mean;
the background class (index 0) can additionally be excluded to evaluate
background-free variants of a dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError


class ConfusionMatrix:
    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise ConfigError("need at least one class")
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def accumulate(self, pred: np.ndarray, gt: np.ndarray, ignore_index: int = 255) -> "ConfusionMatrix":
        """Add one image's pixels; gt pixels equal to ignore_index are skipped."""
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} disagree")
        keep = gt != ignore_index
        gt_kept = gt[keep].astype(np.int64)
        pred_kept = pred[keep].astype(np.int64)
        c = self.num_classes
        if gt_kept.size:
            if gt_kept.min() < 0 or gt_kept.max() >= c:
                raise ShapeError(f"ground-truth label outside [0, {c}) and not ignore")
            if pred_kept.min() < 0 or pred_kept.max() >= c:
                raise ShapeError(f"predicted label outside [0, {c})")
            flat = np.bincount(gt_kept * c + pred_kept, minlength=c * c)
            self.counts += flat.reshape(c, c)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Combine two partial matrices (associative and commutative)."""
        if other.num_classes != self.num_classes:
            raise ShapeError("cannot merge confusion matrices of different sizes")
        out = ConfusionMatrix(self.num_classes)
        out.counts = self.counts + other.counts
        return out

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricsReport:
    per_class_iou: list[float | None]  # None for classes excluded from the mean
    miou: float
    total_pixels: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "miou": self.miou,
            "per_class_iou": self.per_class_iou,
            "total_pixels": self.total_pixels,
            "config": self.config,
        }


def miou(cm: ConfusionMatrix, class_mask: np.ndarray | None = None,
         config: dict | None = None) -> MetricsReport:
    """IoU per class and their mean over scored classes.

    ``class_mask`` selects which classes may enter the mean (e.g. to drop a
    background class); zero-union classes are always excluded.
    """
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    union = counts.sum(axis=1) + counts.sum(axis=0) - diag
    scored = union > 0
    if class_mask is not None:
        class_mask = np.asarray(class_mask, dtype=bool)
        if class_mask.shape != (cm.num_classes,):
            raise ShapeError(f"class mask must have {cm.num_classes} entries")
        scored &= class_mask
    if not scored.any():
        raise ConfigError("no scored pixels: every class has zero union")
    per_class: list[float | None] = []
    for c in range(cm.num_classes):
        per_class.append(float(diag[c] / union[c]) if scored[c] else None)
    mean = float(np.mean([v for v in per_class if v is not None]))
    return MetricsReport(
        per_class_iou=per_class,
        miou=mean,
        total_pixels=cm.total,
        config=dict(config or {}),
    )


@dataclass
class DatasetSpec:
    """Generic folder dataset: images/ + masks/ + classes.txt."""

    image_dir: Path
    mask_dir: Path
    class_file: Path
    ignore_index: int = 255
    include_background: bool = True

    @classmethod
    def from_root(cls, root: str | Path, ignore_index: int = 255,
                  include_background: bool = True) -> "DatasetSpec":
        root = Path(root)
        return cls(
            image_dir=root / "images",
            mask_dir=root / "masks",
            class_file=root / "classes.txt",
            ignore_index=ignore_index,
            include_background=include_background,
        )

    def class_names(self) -> list[str]:
        if not self.class_file.exists():
            raise ConfigError(f"class file not found: {self.class_file}")
        names = [
            line.strip() for line in self.class_file.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        ]
        if not names:
            raise ConfigError(f"class file {self.class_file} lists no classes")
        return names

    def pairs(self) -> list[tuple[Path, Path]]:
        """Image/mask path pairs; every image must have a mask with the same stem."""
        if not self.image_dir.is_dir():
            raise ConfigError(f"image directory not found: {self.image_dir}")
        images = sorted(
            p for p in self.image_dir.iterdir()
            if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not images:
            raise ConfigError(f"no images found under {self.image_dir}")
        out = []
        missing = []
        for img in images:
            mask = self.mask_dir / (img.stem + ".png")
            if mask.exists():
                out.append((img, mask))
            else:
                missing.append(img.name)
        if missing:
            raise ConfigError(f"images without masks: {', '.join(missing[:5])}")
        return out

    def scored_class_mask(self, num_classes: int) -> np.ndarray:
        mask = np.ones(num_classes, dtype=bool)
        if not self.include_background:
            mask[0] = False
        return mask
