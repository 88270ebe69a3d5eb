"""Training-free open-vocabulary semantic segmentation.

A CLIP-style vision transformer whose final block can trade its image-level
specialization for spatial consistency: key-key attention logits augmented
with a Gaussian neighbourhood prior, optionally with the feed-forward block
and residuals removed.  Patch features are classified against text-encoded
class names by cosine similarity, fused across sliding windows, optionally
refined with pixel-adaptive smoothing, and reported as index masks.
"""

from .api import ModelBundle, OpenVocabSegmenter, resolve_variant
from .attention import AttentionConfig, AttentionWeights
from .config import (IMAGE_MEAN, IMAGE_STD, TextConfig, VisionConfig,
                     text_preset, vision_preset)
from .encoder import FeatureGrid, VisualWeights, forward_features
from .errors import (ConfigError, CorruptionError, FormatError, NasegError,
                     NotFittedError, ParameterError, ShapeError, ValidationError)
from .evaluate import ConfusionMatrix, DatasetSpec, MetricsReport, miou
from .prior import PriorTensor, count_boosted_patches, neighbourhood_radius, omega, phi, prior_tensor
from .segmenter import (LogitVolume, PamrConfig, SegmentationResult, SlidingConfig,
                        pamr_refine, resize_and_tile, segment, window_logits)
from .text import (BpeVocabulary, ClassEmbeddingSet, TextWeights, TokenSequence,
                   embed_classes, text_forward, tokenize)
from .weights import (CheckedWeights, TensorArchive, full_manifest, load_archive,
                      save_archive, text_manifest, validate, vision_manifest)

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig", "AttentionWeights", "BpeVocabulary", "CheckedWeights",
    "ClassEmbeddingSet", "ConfigError", "ConfusionMatrix", "CorruptionError",
    "DatasetSpec", "FeatureGrid", "FormatError", "IMAGE_MEAN", "IMAGE_STD",
    "LogitVolume", "MetricsReport", "ModelBundle", "NasegError", "NotFittedError",
    "OpenVocabSegmenter", "PamrConfig", "ParameterError", "PriorTensor",
    "SegmentationResult", "ShapeError", "SlidingConfig", "TensorArchive",
    "TextConfig", "TextWeights", "TokenSequence", "ValidationError",
    "VisionConfig", "VisualWeights", "count_boosted_patches", "embed_classes",
    "forward_features", "full_manifest", "load_archive", "miou",
    "neighbourhood_radius", "omega", "pamr_refine", "phi", "prior_tensor",
    "resize_and_tile", "resolve_variant", "save_archive", "segment",
    "text_forward", "text_manifest", "tokenize", "validate", "vision_manifest",
    "window_logits",
]
