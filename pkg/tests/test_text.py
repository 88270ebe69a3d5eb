from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import naseg.text as text_mod
from naseg.errors import ConfigError, FormatError
from naseg.text import (BpeVocabulary, TextWeights, embed_classes, text_forward,
                        tokenize)
from naseg.weights import text_manifest

from helpers import TINY_TEXT, random_named_tensors
from reference import reference_bpe_encode, reference_text_forward

MERGES_PATH = Path(__file__).parent / "data" / "mini_merges.txt"
VOCAB = BpeVocabulary.from_file(MERGES_PATH)
TENSORS = random_named_tensors(text_manifest(TINY_TEXT), seed=4)
WEIGHTS = TextWeights.from_tensors(TENSORS, TINY_TEXT)


def load_merge_pairs():
    pairs = []
    for line in MERGES_PATH.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            a, b = line.split(" ")
            pairs.append((a, b))
    return pairs


class TestVocabulary:
    def test_size_and_specials(self):
        assert VOCAB.size == 525
        assert VOCAB.sot_id == 523
        assert VOCAB.eot_id == 524

    def test_explicit_vocab_size(self):
        v = BpeVocabulary.from_file(MERGES_PATH, vocab_size=525)
        assert v.size == 525

    def test_vocab_size_unreachable(self):
        with pytest.raises(FormatError):
            BpeVocabulary.from_file(MERGES_PATH, vocab_size=9999)

    def test_known_ids(self):
        # frozen from the independent one-merge-at-a-time reference
        assert VOCAB.encode("a photo of a cat") == [320, 520, 515, 320, 517]
        assert VOCAB.encode("the dog") == [516, 522]
        assert VOCAB.encode("thx") == [512, 343]

    @given(st.lists(st.sampled_from("ach tophdefgox".split() or []), min_size=0, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_matches_reference_bpe(self, words):
        text = " ".join(words)
        if not text.strip():
            return
        assert VOCAB.encode(text) == reference_bpe_encode(text, load_merge_pairs())

    def test_decode_round_trip_ascii(self):
        # word-split boundaries (punctuation, digits) resurface as spaces,
        # so the exact round trip is over space-separated letter words
        for s in ["a photo of a cat", "the dog", "unusual words work too", "MiXeD CaSe words"]:
            ids = VOCAB.encode(s)
            assert VOCAB.decode(ids) == " ".join(s.lower().split())

    def test_decode_spaces_punctuation(self):
        assert VOCAB.decode(VOCAB.encode("unusual-words")) == "unusual - words"


class TestTokenize:
    def test_empty_string(self):
        seq = tokenize("", VOCAB, TINY_TEXT.context_length)
        assert seq.ids[0] == VOCAB.sot_id
        assert seq.ids[1] == VOCAB.eot_id
        assert seq.eot_index == 1
        assert not seq.ids[2:].any()

    def test_deterministic_and_padding_stable(self):
        a = tokenize("the cat", VOCAB, TINY_TEXT.context_length)
        b = tokenize("  the   cat ", VOCAB, TINY_TEXT.context_length)
        assert np.array_equal(a.ids, b.ids)
        assert a.eot_index == b.eot_index

    def test_framing(self):
        seq = tokenize("a photo of a cat", VOCAB, TINY_TEXT.context_length)
        content = [320, 520, 515, 320, 517]
        assert seq.ids[:2 + len(content)].tolist() == [VOCAB.sot_id] + content + [VOCAB.eot_id]
        assert seq.eot_index == 1 + len(content)
        assert len(seq.ids) == TINY_TEXT.context_length

    def test_truncation_warns(self):
        with pytest.warns(UserWarning, match="truncated"):
            seq = tokenize("cat " * 40, VOCAB, TINY_TEXT.context_length)
        assert seq.eot_index == TINY_TEXT.context_length - 1


class TestTextForward:
    def test_deterministic(self):
        seq = tokenize("the dog", VOCAB, TINY_TEXT.context_length)
        a = text_forward(seq, WEIGHTS, TINY_TEXT)
        b = text_forward(seq, WEIGHTS, TINY_TEXT)
        assert np.array_equal(a, b)

    def test_padding_after_eot_is_ignored(self):
        seq = tokenize("the dog", VOCAB, TINY_TEXT.context_length)
        base = text_forward(seq, WEIGHTS, TINY_TEXT)
        tampered = tokenize("the dog", VOCAB, TINY_TEXT.context_length)
        tampered.ids[seq.eot_index + 2] = 42  # a padding slot
        assert np.array_equal(text_forward(tampered, WEIGHTS, TINY_TEXT), base)

    def test_matches_loop_reference(self):
        seq = tokenize("a photo of a cat", VOCAB, TINY_TEXT.context_length)
        got = text_forward(seq, WEIGHTS, TINY_TEXT)
        want = reference_text_forward(seq.ids, seq.eot_index, TENSORS, TINY_TEXT)
        assert np.max(np.abs(got - want)) < 1e-5

    def test_output_dim(self):
        seq = tokenize("cat", VOCAB, TINY_TEXT.context_length)
        assert text_forward(seq, WEIGHTS, TINY_TEXT).shape == (TINY_TEXT.output_dim,)


class TestEmbedClasses:
    def test_single_class_single_template(self):
        got = embed_classes(["cat"], ["a photo of a {}."], WEIGHTS, TINY_TEXT, VOCAB)
        seq = tokenize("a photo of a cat.", VOCAB, TINY_TEXT.context_length)
        raw = text_forward(seq, WEIGHTS, TINY_TEXT)
        want = raw / np.linalg.norm(raw)
        assert np.allclose(got.matrix[0], want, atol=1e-6)

    def test_duplicate_templates_idempotent(self):
        one = embed_classes(["dog"], ["a photo of a {}."], WEIGHTS, TINY_TEXT, VOCAB)
        two = embed_classes(["dog"], ["a photo of a {}."] * 2, WEIGHTS, TINY_TEXT, VOCAB)
        assert np.allclose(one.matrix, two.matrix, atol=1e-6)

    def test_orthogonal_encodings_average(self, monkeypatch):
        e1 = np.zeros(TINY_TEXT.output_dim, np.float32)
        e2 = np.zeros(TINY_TEXT.output_dim, np.float32)
        e1[0] = 2.0   # different norms on purpose: normalized before averaging
        e2[1] = 0.5
        outputs = iter([e1, e2])
        monkeypatch.setattr(text_mod, "text_forward", lambda *a, **k: next(outputs))
        got = embed_classes(["thing"], ["a {}.", "the {}."], WEIGHTS, TINY_TEXT, VOCAB)
        want = np.zeros(TINY_TEXT.output_dim, np.float32)
        want[0] = want[1] = 1.0 / np.sqrt(2.0)
        assert np.allclose(got.matrix[0], want, atol=1e-6)

    def test_rows_unit_norm(self):
        got = embed_classes(["cat", "dog", "photo"], None, WEIGHTS, TINY_TEXT, VOCAB)
        norms = np.linalg.norm(got.matrix, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-5

    def test_synonyms_pooled(self):
        single = embed_classes(["cat"], None, WEIGHTS, TINY_TEXT, VOCAB)
        doubled = embed_classes(["cat,cat"], None, WEIGHTS, TINY_TEXT, VOCAB)
        assert np.allclose(single.matrix, doubled.matrix, atol=1e-6)

    def test_template_without_placeholder(self):
        with pytest.raises(ConfigError, match="placeholder"):
            embed_classes(["cat"], ["a photo"], WEIGHTS, TINY_TEXT, VOCAB)

    def test_empty_names(self):
        with pytest.raises(ConfigError):
            embed_classes([], None, WEIGHTS, TINY_TEXT, VOCAB)
