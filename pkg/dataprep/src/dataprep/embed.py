"""Text embeddings: mean-pooled token representations.

Two encoders are available by id:

  hashing[:<dim>]              deterministic offline reference encoder; each
                               whitespace token gets a stable hash-seeded
                               vector, the text embedding is their mean
  sentence-transformers:<id>   any sentence-transformers model (extra
                               dependency; needs the model locally)

Unit normalisation is off by default.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Protocol

import numpy as np

from .schema import write_atomic


class EmbeddingError(Exception):
    pass


class Encoder(Protocol):
    id: str
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...


class HashingEncoder:
    """Stable, dependency-free token encoder for offline pipelines/tests."""

    def __init__(self, dim: int = 32):
        if dim < 1:
            raise EmbeddingError("embedding dim must be >= 1")
        self.dim = dim
        self.id = f"hashing:{dim}"

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        return np.random.default_rng(seed).standard_normal(self.dim)

    def embed_text(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            raise EmbeddingError("cannot embed empty text")
        return np.mean([self._token_vector(t) for t in tokens], axis=0)


class SentenceTransformerEncoder:
    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise EmbeddingError(
                "sentence-transformers is not installed; "
                "pip install 'neucache-dataprep[encoders]'"
            ) from exc
        self._model = SentenceTransformer(model_id)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.id = f"sentence-transformers:{model_id}"

    def embed_text(self, text: str) -> np.ndarray:  # pragma: no cover - needs model
        if not text.strip():
            raise EmbeddingError("cannot embed empty text")
        return np.asarray(self._model.encode([text])[0], dtype=float)


def make_encoder(encoder_id: str) -> Encoder:
    if encoder_id == "hashing":
        return HashingEncoder()
    if encoder_id.startswith("hashing:"):
        return HashingEncoder(dim=int(encoder_id.split(":", 1)[1]))
    if encoder_id.startswith("sentence-transformers:"):
        return SentenceTransformerEncoder(encoder_id.split(":", 1)[1])
    raise EmbeddingError(
        f"unknown encoder id {encoder_id!r}; expected 'hashing[:<dim>]' or "
        "'sentence-transformers:<model>'"
    )


def embed_items(
    items: list[tuple[str, str]],  # (id, text)
    encoder: Encoder,
    unit_norm: bool = False,
) -> dict[str, np.ndarray]:
    """Embeddings keyed by item id; raises naming the item on empty text."""
    out: dict[str, np.ndarray] = {}
    for item_id, text in items:
        try:
            vec = encoder.embed_text(text)
        except EmbeddingError as exc:
            raise EmbeddingError(f"item {item_id}: {exc}") from exc
        if unit_norm:
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                raise EmbeddingError(f"item {item_id}: zero-norm embedding")
            vec = vec / norm
        out[item_id] = vec
    return out


def write_embeddings(embeddings: dict[str, np.ndarray], encoder_id: str, path: str) -> None:
    lines = [
        json.dumps({"id": item_id, "encoder": encoder_id,
                    "embedding": [float(v) for v in vec]},
                   sort_keys=True, separators=(",", ":"))
        for item_id, vec in sorted(embeddings.items())
    ]
    write_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


def load_embeddings(path: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    if not os.path.isfile(path):
        raise EmbeddingError(f"no embeddings file at {path}")
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                record = json.loads(line)
                out[record["id"]] = np.asarray(record["embedding"], dtype=float)
    return out
