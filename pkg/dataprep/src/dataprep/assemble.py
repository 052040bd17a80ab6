"""Assemble a simulator dataset directory from an annotated corpus.

Joins annotations (id, text, gold, teacher_logprobs) with computed feature
and embedding vectors, applies the online/test split, and writes the dataset
directory schema.
"""

from __future__ import annotations

import json

import numpy as np

from .embed import Encoder, embed_items
from .schema import Record, write_dataset_dir


class AssembleError(Exception):
    pass


def load_annotations(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AssembleError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            for key in ("id", "text", "gold", "teacher_logprobs"):
                if key not in record:
                    raise AssembleError(f"{path}:{lineno}: missing key {key!r}")
            records.append(record)
    if not records:
        raise AssembleError(f"{path}: no annotations found")
    return records


def assemble_dataset(
    annotations: list[dict],
    name: str,
    class_names: list[str],
    out_dir: str,
    feature_encoder: Encoder,
    embedding_encoder: Encoder | None = None,
    split_ratio: float = 0.8,
    test_count: int | None = None,
    split_seed: int = 0,
) -> None:
    embedding_encoder = embedding_encoder or feature_encoder
    texts = [(r["id"], r["text"]) for r in annotations]
    features = embed_items(texts, feature_encoder)
    embeddings = (features if embedding_encoder is feature_encoder
                  else embed_items(texts, embedding_encoder))

    records = []
    for r in annotations:
        if len(r["teacher_logprobs"]) != len(class_names):
            raise AssembleError(
                f"item {r['id']}: {len(r['teacher_logprobs'])} log-probs for "
                f"{len(class_names)} classes"
            )
        if not isinstance(r["gold"], int) or not 0 <= r["gold"] < len(class_names):
            raise AssembleError(f"item {r['id']}: gold index {r['gold']!r} out of range")
        records.append(Record(
            id=str(r["id"]),
            text=r["text"],
            features=[float(v) for v in features[r["id"]]],
            embedding=[float(v) for v in embeddings[r["id"]]],
            gold=r["gold"],
            teacher_logprobs=[float(v) for v in r["teacher_logprobs"]],
        ))

    order = np.random.default_rng(split_seed).permutation(len(records))
    if test_count is not None:
        if test_count >= len(records):
            raise AssembleError(f"test count {test_count} does not fit {len(records)} items")
        n_online = len(records) - test_count
    else:
        if not 0.0 < split_ratio < 1.0:
            raise AssembleError(f"split ratio must be in (0, 1), got {split_ratio}")
        n_online = round(split_ratio * len(records))
    online = [records[i] for i in sorted(order[:n_online])]
    test = [records[i] for i in sorted(order[n_online:])]
    write_dataset_dir(
        out_dir, name=name, class_names=class_names, online=online, test=test,
        note=(f"annotated corpus; features={feature_encoder.id}, "
              f"embeddings={embedding_encoder.id}"),
    )
