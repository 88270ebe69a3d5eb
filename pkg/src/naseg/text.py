"""Text side: byte-level BPE tokenizer, causal transformer, class embeddings.

The tokenizer follows the byte-level BPE scheme used by CLIP-style models:
input text is normalized (lowercase, whitespace collapse), split into words,
each word's UTF-8 bytes are mapped to printable unicode stand-ins, and merge
rules are applied greedily in rank order with an end-of-word marker on the
final byte.  The vocabulary is reconstructed from a merges file: 256 byte
symbols, 256 end-of-word byte symbols, one symbol per merge, then the
start/end specials.  With the standard 49408-entry vocabulary the specials
land at 49406 and 49407.
"""

from __future__ import annotations

import gzip
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import regex

from .attention import AttentionConfig, self_attention
from .config import TextConfig
from .encoder import EncoderBlockWeights, _block_from_tensors, _mlp
from .errors import ConfigError, FormatError
from .numerics import Tensor, as_tensor, l2_normalize_rows, layer_norm, matmul

_WORD_PATTERN = regex.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d|[\p{L}]+|[\p{N}]|[^\s\p{L}\p{N}]+""",
    regex.IGNORECASE,
)


@lru_cache(maxsize=1)
def _bytes_to_unicode() -> dict[int, str]:
    """Map every byte to a printable unicode character (the GPT-2 scheme)."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


class BpeVocabulary:
    """Merge rules plus the token <-> id tables derived from them."""

    def __init__(self, merges: list[tuple[str, str]]):
        byte_symbols = list(_bytes_to_unicode().values())
        vocab = byte_symbols + [s + "</w>" for s in byte_symbols]
        for a, b in merges:
            vocab.append(a + b)
        vocab.append("<|startoftext|>")
        vocab.append("<|endoftext|>")
        self.token_to_id = {tok: i for i, tok in enumerate(vocab)}
        if len(self.token_to_id) != len(vocab):
            raise FormatError("merges produce duplicate vocabulary symbols")
        self.id_to_token = vocab
        self.ranks = {pair: i for i, pair in enumerate(merges)}
        self.sot_id = self.token_to_id["<|startoftext|>"]
        self.eot_id = self.token_to_id["<|endoftext|>"]
        self._byte_encoder = _bytes_to_unicode()
        self._byte_decoder = {c: b for b, c in self._byte_encoder.items()}
        self._cache: dict[str, list[str]] = {}

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    @classmethod
    def from_file(cls, path: str | Path, vocab_size: int | None = None) -> "BpeVocabulary":
        """Load a ranked merges file (one space-separated pair per line).

        Lines starting with '#' and blank lines are skipped.  When
        ``vocab_size`` is given, exactly vocab_size - 514 merges are taken
        from the top of the file (the standard full file carries more
        merges than its published vocabulary uses).
        """
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", encoding="utf-8") as f:
            lines = f.read().split("\n")
        merges: list[tuple[str, str]] = []
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                # the standard file ends with junk past the used range; stop there
                break
            merges.append((parts[0], parts[1]))
        if vocab_size is not None:
            wanted = vocab_size - 2 * 256 - 2
            if wanted < 0 or len(merges) < wanted:
                raise FormatError(
                    f"{path}: {len(merges)} merges cannot build a vocabulary of {vocab_size}"
                )
            merges = merges[:wanted]
        return cls(merges)

    def _apply_merges(self, word: str) -> list[str]:
        """BPE-merge one word of byte symbols; the last byte carries </w>."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word[:-1]) + [word[-1] + "</w>"]
        while len(symbols) > 1:
            pairs = {(symbols[i], symbols[i + 1]) for i in range(len(symbols) - 1)}
            best = min(pairs, key=lambda p: self.ranks.get(p, float("inf")))
            if best not in self.ranks:
                break
            merged = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == best:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        self._cache[word] = symbols
        return symbols

    def encode(self, text: str) -> list[int]:
        """Content token ids for normalized text (no SOT/EOT framing)."""
        ids: list[int] = []
        for word in _WORD_PATTERN.findall(normalize_text(text)):
            as_symbols = "".join(self._byte_encoder[b] for b in word.encode("utf-8"))
            ids.extend(self.token_to_id[s] for s in self._apply_merges(as_symbols))
        return ids

    def decode(self, ids) -> str:
        """Inverse of encode for content ids; the specials are dropped."""
        parts = []
        for i in ids:
            i = int(i)
            if i in (self.sot_id, self.eot_id):
                continue
            parts.append(self.id_to_token[i])
        data = bytes(self._byte_decoder[c] for c in "".join(parts))
        return data.decode("utf-8", errors="replace").replace("</w>", " ").strip()


@dataclass
class TokenSequence:
    """Fixed-length id buffer: SOT, content, EOT, zero padding."""

    ids: np.ndarray
    eot_index: int


def tokenize(text: str, vocab: BpeVocabulary, context_length: int = 77) -> TokenSequence:
    """Frame text as [SOT, content..., EOT, 0...] of exactly context_length ids."""
    content = vocab.encode(text)
    limit = context_length - 2
    if len(content) > limit:
        warnings.warn(f"input of {len(content)} tokens truncated to {limit}")
        content = content[:limit]
    ids = np.zeros(context_length, dtype=np.int64)
    ids[0] = vocab.sot_id
    ids[1:1 + len(content)] = content
    eot_index = 1 + len(content)
    ids[eot_index] = vocab.eot_id
    return TokenSequence(ids=ids, eot_index=eot_index)


@dataclass(frozen=True)
class TextWeights:
    token_embedding: Tensor  # vocab x D
    pos_embedding: Tensor    # context x D
    blocks: tuple[EncoderBlockWeights, ...]
    ln_final_gain: Tensor
    ln_final_bias: Tensor
    proj: Tensor             # D x D_out

    @classmethod
    def from_tensors(cls, t, cfg: TextConfig) -> "TextWeights":
        blocks = tuple(_block_from_tensors(t, f"text.blocks.{i}") for i in range(cfg.depth))
        return cls(
            token_embedding=t["text.token_embedding"],
            pos_embedding=t["text.pos_embedding"],
            blocks=blocks,
            ln_final_gain=t["text.ln_final.gain"],
            ln_final_bias=t["text.ln_final.bias"],
            proj=t["text.proj"],
        )


def causal_mask(n: int) -> Tensor:
    """Additive mask: position t may attend to positions <= t only."""
    mask = np.full((n, n), -np.inf, dtype=np.float32)
    return np.triu(mask, k=1)


def text_forward(tokens: TokenSequence, weights: TextWeights, cfg: TextConfig) -> Tensor:
    """Causal transformer over the token ids, pooled at the EOT position."""
    ids = tokens.ids
    if ids.shape != (cfg.context_length,):
        raise ConfigError(f"expected {cfg.context_length} token ids, got {ids.shape}")
    if ids.max() >= weights.token_embedding.shape[0]:
        raise ConfigError("token id outside the embedding table")
    x = (weights.token_embedding[ids] + weights.pos_embedding).astype(np.float32)
    mask = causal_mask(cfg.context_length)
    attn_cfg = AttentionConfig(variant="vanilla", num_heads=cfg.heads, head_dim=cfg.head_dim)
    for bw in weights.blocks:
        x = x + self_attention(layer_norm(x, bw.ln1_gain, bw.ln1_bias), bw.attn, attn_cfg, mask=mask)
        x = x + _mlp(layer_norm(x, bw.ln2_gain, bw.ln2_bias), bw)
    x = layer_norm(x, weights.ln_final_gain, weights.ln_final_bias)
    pooled = x[tokens.eot_index]
    return matmul(pooled[None, :], weights.proj)[0]


@dataclass
class ClassEmbeddingSet:
    """Unit-norm embedding per class, with the prompts that produced them."""

    class_names: list[str]
    templates: list[str]
    matrix: Tensor  # C x D_out

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


DEFAULT_TEMPLATES = ["a photo of a {}."]


def embed_classes(names: list[str], templates: list[str] | None, weights: TextWeights,
                  cfg: TextConfig, vocab: BpeVocabulary) -> ClassEmbeddingSet:
    """Encode every (template, synonym) prompt per class and average.

    Each encoding is L2-normalized before averaging and the mean is
    re-normalized, so every template contributes with equal weight.  A class
    name may contain comma-separated synonyms, which are pooled the same way.
    """
    if not names:
        raise ConfigError("need at least one class name")
    templates = list(templates) if templates else list(DEFAULT_TEMPLATES)
    for t in templates:
        if "{}" not in t:
            raise ConfigError(f"template {t!r} has no {{}} placeholder")
    rows = []
    for name in names:
        synonyms = [s.strip() for s in name.split(",") if s.strip()]
        if not synonyms:
            raise ConfigError(f"class entry {name!r} is empty")
        encoded = []
        for syn in synonyms:
            for template in templates:
                seq = tokenize(template.format(syn), vocab, cfg.context_length)
                encoded.append(text_forward(seq, weights, cfg))
        stacked = l2_normalize_rows(as_tensor(np.stack(encoded)))
        rows.append(stacked.mean(axis=0))
    matrix = l2_normalize_rows(as_tensor(np.stack(rows)))
    return ClassEmbeddingSet(class_names=list(names), templates=templates, matrix=matrix)
