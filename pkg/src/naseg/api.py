"""Estimator-style front door: configure, fit on class names, predict masks.

fit() is where the open-vocabulary "training" happens: the class names are
encoded by the frozen text tower into unit-norm embeddings.  predict() runs
the sliding-window visual pipeline against those embeddings.  Parameters
follow the scikit-learn convention: the constructor only records them,
get_params/set_params expose them, and all derived state lives in
underscore-suffixed attributes created by fit().
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import AttentionConfig
from .config import (IMAGE_MEAN, IMAGE_STD, TextConfig, VisionConfig,
                     text_preset, vision_preset)
from .encoder import VisualWeights
from .errors import ConfigError
from .segmenter import PamrConfig, SegmentationResult, SlidingConfig, segment
from .text import BpeVocabulary, TextWeights, embed_classes
from .validation import check_class_names, check_image, check_is_fitted
from .weights import full_manifest, load_archive, validate

# CLI spelling -> internal variant name
VARIANT_ALIASES = {
    "vanilla": "vanilla",
    "kk": "kk",
    "n-only": "neighbourhood_only",
    "neighbourhood_only": "neighbourhood_only",
    "naclip": "naclip",
}


def resolve_variant(name: str) -> str:
    try:
        return VARIANT_ALIASES[name]
    except KeyError:
        raise ConfigError(f"unknown variant {name!r}; known: {sorted(VARIANT_ALIASES)}")


@dataclass
class ModelBundle:
    """Validated weights for both towers plus their configurations."""

    vision_cfg: VisionConfig
    text_cfg: TextConfig
    visual: VisualWeights
    text: TextWeights

    @classmethod
    def from_archive(cls, path: str | Path, vision_cfg: VisionConfig,
                     text_cfg: TextConfig) -> "ModelBundle":
        archive = load_archive(path)
        checked = validate(archive, full_manifest(vision_cfg, text_cfg))
        return cls(
            vision_cfg=vision_cfg,
            text_cfg=text_cfg,
            visual=VisualWeights.from_tensors(checked, vision_cfg),
            text=TextWeights.from_tensors(checked, text_cfg),
        )


class OpenVocabSegmenter:
    """Open-vocabulary segmenter with a scikit-learn flavoured API.

    Parameters
    ----------
    weights : path to a tensor archive (see naseg.weights).
    vocab : path to a ranked BPE merges file.
    preset : model size preset ("b16", "b32", "l14"); ignored when explicit
        vision_config/text_config objects are given.
    variant : attention logits in the final block: "vanilla", "kk",
        "n-only"/"neighbourhood_only", or "naclip".
    arch : final-block architecture, "vanilla" or "reduced".
    sigma : Gaussian neighbourhood width in patch units.
    """

    def __init__(self, weights=None, vocab=None, *, preset="b16",
                 vision_config=None, text_config=None,
                 variant="naclip", arch="reduced", sigma=5.0, attn_scope="last",
                 templates=None, pamr=True, pamr_iterations=10,
                 pamr_dilations=(1, 2, 4, 8, 12, 24),
                 short_side=336, stride=112, temperature=100.0,
                 image_mean=IMAGE_MEAN, image_std=IMAGE_STD):
        self.weights = weights
        self.vocab = vocab
        self.preset = preset
        self.vision_config = vision_config
        self.text_config = text_config
        self.variant = variant
        self.arch = arch
        self.sigma = sigma
        self.attn_scope = attn_scope
        self.templates = templates
        self.pamr = pamr
        self.pamr_iterations = pamr_iterations
        self.pamr_dilations = pamr_dilations
        self.short_side = short_side
        self.stride = stride
        self.temperature = temperature
        self.image_mean = image_mean
        self.image_std = image_std
        self.classes_ = None

    # -- parameter plumbing ------------------------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [n for n in sig.parameters if n != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "OpenVocabSegmenter":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ConfigError(f"unknown parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        self.classes_ = None  # any change invalidates fitted state
        return self

    # -- resolved configuration --------------------------------------------

    def _configs(self) -> tuple[VisionConfig, TextConfig]:
        if self.vision_config is not None or self.text_config is not None:
            if self.vision_config is None or self.text_config is None:
                raise ConfigError("provide both vision_config and text_config, or neither")
            return self.vision_config, self.text_config
        return vision_preset(self.preset), text_preset(self.preset)

    def _attention_config(self, vision_cfg: VisionConfig) -> AttentionConfig:
        return AttentionConfig(
            variant=resolve_variant(self.variant),
            num_heads=vision_cfg.heads,
            head_dim=vision_cfg.head_dim,
            sigma=float(self.sigma),
        )

    def _sliding_config(self, vision_cfg: VisionConfig) -> SlidingConfig:
        return SlidingConfig(
            window=vision_cfg.input_side,
            stride=int(self.stride),
            short_side=int(self.short_side),
        )

    def _pamr_config(self) -> PamrConfig:
        return PamrConfig(
            iterations=int(self.pamr_iterations),
            dilations=tuple(self.pamr_dilations),
            enabled=bool(self.pamr),
        )

    def describe(self) -> dict:
        """Resolved configuration fingerprint for reproducibility records."""
        vision_cfg, text_cfg = self._configs()
        return {
            "preset": self.preset if self.vision_config is None else "custom",
            "variant": resolve_variant(self.variant),
            "arch": self.arch,
            "sigma": float(self.sigma),
            "attn_scope": self.attn_scope,
            "pamr": bool(self.pamr),
            "pamr_iterations": int(self.pamr_iterations),
            "pamr_dilations": list(self.pamr_dilations),
            "short_side": int(self.short_side),
            "stride": int(self.stride),
            "window": vision_cfg.input_side,
            "temperature": float(self.temperature),
            "templates": list(self.templates) if self.templates else None,
            "image_mean": list(self.image_mean),
            "image_std": list(self.image_std),
        }

    # -- fitting and prediction ---------------------------------------------

    def fit(self, class_names, templates=None) -> "OpenVocabSegmenter":
        """Load weights and encode the class vocabulary into embeddings."""
        names = check_class_names(class_names)
        vision_cfg, text_cfg = self._configs()
        if self.weights is None:
            raise ConfigError("no weight archive configured")
        if isinstance(self.weights, ModelBundle):
            bundle = self.weights
        else:
            bundle = ModelBundle.from_archive(self.weights, vision_cfg, text_cfg)
        if isinstance(self.vocab, BpeVocabulary):
            vocabulary = self.vocab
        elif self.vocab is not None:
            vocabulary = BpeVocabulary.from_file(self.vocab, vocab_size=text_cfg.vocab_size)
        else:
            raise ConfigError("no BPE vocabulary configured")
        if vocabulary.size != text_cfg.vocab_size:
            raise ConfigError(
                f"vocabulary size {vocabulary.size} != text config vocab {text_cfg.vocab_size}"
            )
        templates = templates if templates is not None else self.templates
        self.bundle_ = bundle
        self.vocabulary_ = vocabulary
        self.classes_ = embed_classes(names, templates, bundle.text, text_cfg, vocabulary)
        return self

    def predict(self, image) -> np.ndarray:
        """Class-index mask at the input image's resolution."""
        return self._run(image).mask

    def predict_result(self, image) -> SegmentationResult:
        """Mask plus the fused logit volume at the working resolution."""
        return self._run(image, return_volume=True)

    def _run(self, image, return_volume: bool = False) -> SegmentationResult:
        check_is_fitted(self)
        image = check_image(image)
        vision_cfg, _ = self._configs()
        return segment(
            image,
            self.classes_,
            self.bundle_.visual,
            vision_cfg,
            self._attention_config(vision_cfg),
            arch=self.arch,
            sliding=self._sliding_config(vision_cfg),
            pamr=self._pamr_config(),
            temperature=float(self.temperature),
            image_mean=self.image_mean,
            image_std=self.image_std,
            attn_scope=self.attn_scope,
            return_volume=return_volume,
        )
