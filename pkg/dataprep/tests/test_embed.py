import numpy as np
import pytest

from dataprep.embed import (
    EmbeddingError,
    HashingEncoder,
    embed_items,
    load_embeddings,
    make_encoder,
    write_embeddings,
)


class TestHashingEncoder:
    def test_identical_texts_identical_embeddings(self):
        enc = HashingEncoder(dim=16)
        a = enc.embed_text("the quick brown fox")
        b = enc.embed_text("the quick brown fox")
        assert np.array_equal(a, b)

    def test_mean_pooling_over_tokens(self):
        enc = HashingEncoder(dim=8)
        tokens = ["alpha", "beta", "gamma"]
        pooled = enc.embed_text(" ".join(tokens))
        manual = np.mean([enc._token_vector(t) for t in tokens], axis=0)
        assert np.allclose(pooled, manual)

    def test_empty_text_rejected(self):
        with pytest.raises(EmbeddingError):
            HashingEncoder().embed_text("   ")

    def test_self_cosine_is_one(self):
        enc = HashingEncoder(dim=32)
        v = enc.embed_text("some text here")
        assert np.dot(v, v) / (np.linalg.norm(v) ** 2) == pytest.approx(1.0)


class TestEmbedItems:
    def test_error_names_item(self):
        with pytest.raises(EmbeddingError, match="item-7"):
            embed_items([("item-7", "")], HashingEncoder())

    def test_unit_norm_option(self):
        out = embed_items([("a", "hello world")], HashingEncoder(), unit_norm=True)
        assert np.linalg.norm(out["a"]) == pytest.approx(1.0)
        out_raw = embed_items([("a", "hello world")], HashingEncoder())
        assert np.linalg.norm(out_raw["a"]) != pytest.approx(1.0)

    def test_round_trip_file(self, tmp_path):
        enc = HashingEncoder(dim=8)
        out = embed_items([("b", "two words"), ("a", "one")], enc)
        path = str(tmp_path / "emb.jsonl")
        write_embeddings(out, enc.id, path)
        loaded = load_embeddings(path)
        assert set(loaded) == {"a", "b"}
        assert np.array_equal(loaded["a"], out["a"])


class TestEncoderRegistry:
    def test_hashing_with_dim(self):
        enc = make_encoder("hashing:12")
        assert enc.dim == 12
        assert enc.id == "hashing:12"

    def test_unknown_id_rejected(self):
        with pytest.raises(EmbeddingError, match="unknown encoder"):
            make_encoder("quantum:3")
