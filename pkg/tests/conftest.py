import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from naseg.weights import full_manifest, save_archive

from helpers import TINY_TEXT, TINY_VISION, random_image, random_named_tensors

MERGES_PATH = Path(__file__).parent / "data" / "mini_merges.txt"


@pytest.fixture(scope="session")
def tiny_archive(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("weights") / "tiny.naw"
    save_archive(path, random_named_tensors(full_manifest(TINY_VISION, TINY_TEXT), seed=21))
    return path


@pytest.fixture(scope="session")
def tiny_model_config(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("config") / "tiny.json"
    path.write_text(json.dumps({
        "vision": dataclasses.asdict(TINY_VISION),
        "text": dataclasses.asdict(TINY_TEXT),
    }))
    return path


@pytest.fixture(scope="session")
def mini_vocab_path() -> Path:
    return MERGES_PATH


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory) -> Path:
    """Two-image dataset: images/, masks/, classes.txt."""
    root = tmp_path_factory.mktemp("dataset")
    (root / "images").mkdir()
    (root / "masks").mkdir()
    rng = np.random.default_rng(17)
    for i, (h, w) in enumerate([(336, 336), (340, 420)]):
        Image.fromarray(random_image(rng, h, w), mode="RGB").save(root / "images" / f"img{i}.png")
        mask = rng.integers(0, 2, size=(h, w)).astype(np.uint8)
        mask[:4, :4] = 255  # a few ignored pixels
        Image.fromarray(mask, mode="L").save(root / "masks" / f"img{i}.png")
    (root / "classes.txt").write_text("cat\ndog\n")
    return root
