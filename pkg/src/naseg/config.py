"""Model hyperparameter presets and image normalization constants."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

# Channel statistics the released CLIP-style checkpoints were trained with.
# Overridable per run, but the defaults must match the weights in use.
IMAGE_MEAN = (0.48145466, 0.4578275, 0.40821073)
IMAGE_STD = (0.26862954, 0.26130258, 0.27577711)


@dataclass(frozen=True)
class VisionConfig:
    patch_size: int
    depth: int
    width: int
    heads: int
    output_dim: int
    input_side: int = 224

    def __post_init__(self):
        if self.input_side % self.patch_size != 0:
            raise ConfigError(
                f"input side {self.input_side} not divisible by patch size {self.patch_size}"
            )
        if self.width % self.heads != 0:
            raise ConfigError(f"width {self.width} not divisible by {self.heads} heads")

    @property
    def grid(self) -> int:
        return self.input_side // self.patch_size

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    @property
    def head_dim(self) -> int:
        return self.width // self.heads


@dataclass(frozen=True)
class TextConfig:
    width: int
    depth: int
    heads: int
    output_dim: int
    vocab_size: int = 49408
    context_length: int = 77

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ConfigError(f"width {self.width} not divisible by {self.heads} heads")
        if self.context_length < 3:
            raise ConfigError("context length must fit at least SOT + one token + EOT")

    @property
    def head_dim(self) -> int:
        return self.width // self.heads


VISION_PRESETS = {
    "b16": VisionConfig(patch_size=16, depth=12, width=768, heads=12, output_dim=512),
    "b32": VisionConfig(patch_size=32, depth=12, width=768, heads=12, output_dim=512),
    "l14": VisionConfig(patch_size=14, depth=24, width=1024, heads=16, output_dim=768),
}

TEXT_PRESETS = {
    "b16": TextConfig(width=512, depth=12, heads=8, output_dim=512),
    "b32": TextConfig(width=512, depth=12, heads=8, output_dim=512),
    "l14": TextConfig(width=768, depth=12, heads=12, output_dim=768),
}


def vision_preset(name: str) -> VisionConfig:
    try:
        return VISION_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown vision preset {name!r}; known: {sorted(VISION_PRESETS)}")


def text_preset(name: str) -> TextConfig:
    try:
        return TEXT_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown text preset {name!r}; known: {sorted(TEXT_PRESETS)}")
