"""Benchmark ingestion: convert a published teacher-annotation release into
the simulator's dataset directory schema.

The release format is one JSON document per benchmark::

    {"name": ..., "class_names": [...],
     "items": [{"id", "text", "gold", "teacher_logprobs"}, ...]}

Downloads are checksum-verified when the registry pins a digest; any
structural surprise raises SchemaDriftError rather than producing a silently
wrong dataset.  Gold labels may be class names or indices.  Feature and
embedding vectors are computed with the configured encoders, and the
online/test split is fixed per benchmark (ratio or explicit test count).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .corpus import resolve_gold
from .embed import Encoder, embed_items
from .schema import Record, write_dataset_dir


class ChecksumError(Exception):
    pass


class SchemaDriftError(Exception):
    pass


@dataclass(frozen=True)
class BenchmarkSource:
    name: str
    url: str
    sha256: str | None       # None = unpinned (verification skipped)
    class_names: tuple[str, ...]
    split_ratio: float = 0.8  # ignored when test_count is set
    test_count: int | None = None
    split_seed: int = 0


REGISTRY = {
    "isear": BenchmarkSource(
        name="isear",
        url="https://huggingface.co/datasets/guillemram97/cache_llm/resolve/main/isear.json",
        sha256=None,
        class_names=("joy", "fear", "shame", "sadness", "guilt", "disgust", "anger"),
    ),
    "rtpolarity": BenchmarkSource(
        name="rtpolarity",
        url="https://huggingface.co/datasets/guillemram97/cache_llm/resolve/main/rt-polarity.json",
        sha256=None,
        class_names=("positive", "negative"),
    ),
    "fever": BenchmarkSource(
        name="fever",
        url="https://huggingface.co/datasets/guillemram97/cache_llm/resolve/main/fever.json",
        sha256=None,
        class_names=("true", "false"),
    ),
    "openbook": BenchmarkSource(
        name="openbook",
        url="https://huggingface.co/datasets/guillemram97/cache_llm/resolve/main/openbook.json",
        sha256=None,
        class_names=("A", "B", "C", "D"),
        test_count=500,
    ),
}

Downloader = Callable[[str], bytes]


def http_downloader(url: str) -> bytes:  # pragma: no cover - network path
    import requests

    response = requests.get(url, timeout=120)
    response.raise_for_status()
    return response.content


def _verify_checksum(payload: bytes, source: BenchmarkSource) -> None:
    if source.sha256 is None:
        return
    digest = hashlib.sha256(payload).hexdigest()
    if digest != source.sha256:
        raise ChecksumError(
            f"{source.name}: checksum mismatch (expected {source.sha256}, got {digest})"
        )


def parse_release(payload: bytes, source: BenchmarkSource) -> list[dict]:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaDriftError(f"{source.name}: release is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "items" not in doc:
        raise SchemaDriftError(f"{source.name}: release missing 'items'")
    if "class_names" in doc and tuple(doc["class_names"]) != source.class_names:
        raise SchemaDriftError(
            f"{source.name}: upstream classes {doc['class_names']} differ from the "
            f"registered {list(source.class_names)}"
        )
    items = doc["items"]
    if not isinstance(items, list) or not items:
        raise SchemaDriftError(f"{source.name}: release has no items")
    required = {"id", "text", "gold", "teacher_logprobs"}
    for i, item in enumerate(items):
        if not isinstance(item, dict) or not required <= set(item):
            missing = required - set(item) if isinstance(item, dict) else required
            raise SchemaDriftError(f"{source.name}: item {i} missing {sorted(missing)}")
        if len(item["teacher_logprobs"]) != len(source.class_names):
            raise SchemaDriftError(
                f"{source.name}: item {item['id']} has "
                f"{len(item['teacher_logprobs'])} log-probs for "
                f"{len(source.class_names)} classes"
            )
    return items


def split_items(items: list[dict], source: BenchmarkSource) -> tuple[list[dict], list[dict]]:
    order = np.random.default_rng(source.split_seed).permutation(len(items))
    if source.test_count is not None:
        if source.test_count >= len(items):
            raise SchemaDriftError(
                f"{source.name}: fixed test count {source.test_count} does not fit "
                f"{len(items)} items"
            )
        n_online = len(items) - source.test_count
    else:
        n_online = round(source.split_ratio * len(items))
    online_idx = sorted(order[:n_online])
    test_idx = sorted(order[n_online:])
    return [items[i] for i in online_idx], [items[i] for i in test_idx]


def _to_records(items: list[dict], source: BenchmarkSource,
                feature_encoder: Encoder, embedding_encoder: Encoder) -> list[Record]:
    texts = [(item["id"], item["text"]) for item in items]
    features = embed_items(texts, feature_encoder)
    embeddings = (features if embedding_encoder is feature_encoder
                  else embed_items(texts, embedding_encoder))
    records = []
    for item in items:
        gold = resolve_gold(item["gold"], list(source.class_names), item["id"])
        records.append(Record(
            id=str(item["id"]),
            text=item["text"],
            features=[float(v) for v in features[item["id"]]],
            embedding=[float(v) for v in embeddings[item["id"]]],
            gold=gold,
            teacher_logprobs=[float(v) for v in item["teacher_logprobs"]],
        ))
    return records


def fetch_benchmark(
    name: str,
    out_dir: str,
    feature_encoder: Encoder,
    embedding_encoder: Encoder | None = None,
    downloader: Downloader = http_downloader,
) -> None:
    """Download, verify, convert and write one registered benchmark."""
    if name not in REGISTRY:
        raise KeyError(f"unknown benchmark {name!r}; registered: {sorted(REGISTRY)}")
    source = REGISTRY[name]
    payload = downloader(source.url)
    _verify_checksum(payload, source)
    items = parse_release(payload, source)
    online_items, test_items = split_items(items, source)
    embedding_encoder = embedding_encoder or feature_encoder
    online = _to_records(online_items, source, feature_encoder, embedding_encoder)
    test = _to_records(test_items, source, feature_encoder, embedding_encoder)
    write_dataset_dir(
        out_dir,
        name=source.name,
        class_names=list(source.class_names),
        online=online,
        test=test,
        note=(f"converted from the released annotation benchmark; features={feature_encoder.id}, "
              f"embeddings={embedding_encoder.id}"),
    )
