"""Self-describing tensor archive: load, save, and manifest validation.

Archive layout (little-endian throughout)::

    [8 bytes]  uint64 header length H
    [H bytes]  UTF-8 JSON header
    [rest]     raw tensor blob

Header schema (version 1)::

    {
      "format": "naseg-tensor-archive",
      "version": 1,
      "checksum_crc32": 1234567890,          # optional, CRC-32 of the blob
      "entries": {
        "visual.blocks.0.attn.qkv.weight": {"dtype": "f32", "shape": [768, 2304], "offset": 0},
        ...
      }
    }

Offsets are byte offsets into the blob; each entry occupies
4 * prod(shape) bytes of little-endian float32 data.  Only f32 is accepted;
converters must widen half-precision checkpoints.  Archives are immutable
after load and safe for concurrent readers.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TextConfig, VisionConfig
from .errors import CorruptionError, FormatError, ValidationError

MAGIC_FORMAT = "naseg-tensor-archive"
_HEADER_LEN = struct.Struct("<Q")


@dataclass
class TensorArchive:
    entries: dict[str, tuple[tuple[int, ...], int]]  # name -> (shape, byte offset)
    blob: bytes
    path: str = ""

    def names(self) -> list[str]:
        return list(self.entries)

    def get(self, name: str) -> np.ndarray:
        if name not in self.entries:
            raise KeyError(f"archive has no tensor {name!r}")
        shape, offset = self.entries[name]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(self.blob, dtype="<f4", count=count, offset=offset)
        return arr.reshape(shape)


def _reject_duplicates(pairs):
    d = {}
    for key, value in pairs:
        if key in d:
            raise FormatError(f"duplicate name in header: {key!r}")
        d[key] = value
    return d


def load_archive(path: str | Path) -> TensorArchive:
    """Read and sanity-check an archive file; verifies the checksum if present."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER_LEN.size:
        raise FormatError(f"{path}: too short to hold a header length")
    (header_len,) = _HEADER_LEN.unpack_from(raw, 0)
    if _HEADER_LEN.size + header_len > len(raw):
        raise FormatError(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(
            raw[_HEADER_LEN.size:_HEADER_LEN.size + header_len].decode("utf-8"),
            object_pairs_hook=_reject_duplicates,
        )
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: malformed JSON header: {e}") from e
    if not isinstance(header, dict) or header.get("format") != MAGIC_FORMAT:
        raise FormatError(f"{path}: missing or wrong format marker")
    if header.get("version") != 1:
        raise FormatError(f"{path}: unsupported archive version {header.get('version')!r}")
    raw_entries = header.get("entries")
    if raw_entries is None:
        raise FormatError(f"{path}: header has no entries table")

    blob = raw[_HEADER_LEN.size + header_len:]
    checksum = header.get("checksum_crc32")
    if checksum is not None and zlib.crc32(blob) != checksum:
        raise CorruptionError(f"{path}: blob checksum mismatch")

    entries: dict[str, tuple[tuple[int, ...], int]] = {}
    for name, meta in raw_entries.items():
        if meta.get("dtype") != "f32":
            raise FormatError(f"{path}: tensor {name!r} has unsupported dtype {meta.get('dtype')!r}")
        shape = tuple(int(s) for s in meta["shape"])
        if any(s < 0 for s in shape):
            raise FormatError(f"{path}: tensor {name!r} has negative dimension")
        offset = int(meta["offset"])
        size = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
        if offset < 0 or offset + size > len(blob):
            raise CorruptionError(
                f"{path}: tensor {name!r} spans [{offset}, {offset + size}) beyond blob of {len(blob)} bytes"
            )
        entries[name] = (shape, offset)
    return TensorArchive(entries=entries, blob=blob, path=str(path))


def save_archive(path: str | Path, tensors: dict[str, np.ndarray], checksum: bool = True) -> None:
    """Write tensors (cast to float32) as an archive; used by tests and tooling."""
    offsets = {}
    chunks = []
    pos = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        offsets[name] = (list(arr.shape), pos)
        chunks.append(arr.tobytes())
        pos += len(chunks[-1])
    blob = b"".join(chunks)
    header = {
        "format": MAGIC_FORMAT,
        "version": 1,
        "entries": {
            name: {"dtype": "f32", "shape": shape, "offset": off}
            for name, (shape, off) in offsets.items()
        },
    }
    if checksum:
        header["checksum_crc32"] = zlib.crc32(blob)
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_HEADER_LEN.pack(len(payload)))
        f.write(payload)
        f.write(blob)


# --- manifests ---------------------------------------------------------------

def _block_shapes(prefix: str, width: int) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.ln1.gain": (width,),
        f"{prefix}.ln1.bias": (width,),
        f"{prefix}.attn.qkv.weight": (width, 3 * width),
        f"{prefix}.attn.qkv.bias": (3 * width,),
        f"{prefix}.attn.out.weight": (width, width),
        f"{prefix}.attn.out.bias": (width,),
        f"{prefix}.ln2.gain": (width,),
        f"{prefix}.ln2.bias": (width,),
        f"{prefix}.mlp.fc1.weight": (width, 4 * width),
        f"{prefix}.mlp.fc1.bias": (4 * width,),
        f"{prefix}.mlp.fc2.weight": (4 * width, width),
        f"{prefix}.mlp.fc2.bias": (width,),
    }


def vision_manifest(cfg: VisionConfig) -> dict[str, tuple[int, ...]]:
    m: dict[str, tuple[int, ...]] = {
        "visual.patch_embed.weight": (3 * cfg.patch_size * cfg.patch_size, cfg.width),
        "visual.patch_embed.bias": (cfg.width,),
        "visual.class_embedding": (cfg.width,),
        "visual.pos_embedding": (1 + cfg.tokens, cfg.width),
        "visual.ln_pre.gain": (cfg.width,),
        "visual.ln_pre.bias": (cfg.width,),
        "visual.ln_post.gain": (cfg.width,),
        "visual.ln_post.bias": (cfg.width,),
        "visual.proj": (cfg.width, cfg.output_dim),
    }
    for i in range(cfg.depth):
        m.update(_block_shapes(f"visual.blocks.{i}", cfg.width))
    return m


def text_manifest(cfg: TextConfig) -> dict[str, tuple[int, ...]]:
    m: dict[str, tuple[int, ...]] = {
        "text.token_embedding": (cfg.vocab_size, cfg.width),
        "text.pos_embedding": (cfg.context_length, cfg.width),
        "text.ln_final.gain": (cfg.width,),
        "text.ln_final.bias": (cfg.width,),
        "text.proj": (cfg.width, cfg.output_dim),
    }
    for i in range(cfg.depth):
        m.update(_block_shapes(f"text.blocks.{i}", cfg.width))
    return m


def full_manifest(vision: VisionConfig, text: TextConfig) -> dict[str, tuple[int, ...]]:
    m = vision_manifest(vision)
    m.update(text_manifest(text))
    return m


@dataclass
class CheckedWeights:
    """Archive contents verified against a manifest."""

    tensors: dict[str, np.ndarray]
    extra_names: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def validate(archive: TensorArchive, manifest: dict[str, tuple[int, ...]]) -> CheckedWeights:
    """Check every manifest entry is present with the exact shape.

    Raises ValidationError naming every missing or mis-shaped tensor; tensors
    in the archive but not the manifest are reported as warnings, not errors.
    """
    problems = []
    tensors = {}
    for name, shape in manifest.items():
        if name not in archive.entries:
            problems.append(f"missing tensor {name!r} (expected shape {shape})")
            continue
        got = archive.entries[name][0]
        if tuple(got) != tuple(shape):
            problems.append(f"tensor {name!r}: expected shape {tuple(shape)}, got {tuple(got)}")
            continue
        tensors[name] = archive.get(name)
    if problems:
        raise ValidationError("archive does not satisfy manifest:\n  " + "\n  ".join(problems))
    extras = sorted(set(archive.entries) - set(manifest))
    return CheckedWeights(tensors=tensors, extra_names=extras)
