"""Dataset model: annotated streams with recorded teacher label distributions.

A dataset directory holds three files:

  manifest.json   {"name", "class_names", "feature_dim", "embedding_dim",
                   "counts": {"online": n, "test": m}, "note"?: str}
  online.jsonl    one instance per line (the stream pool)
  test.jsonl      held-out instances for final-accuracy evaluation

Instance line schema::

  {"id": str, "text": str|null, "features": [float], "embedding": [float],
   "gold": int, "teacher_logprobs": [float]}

Teacher log-probabilities are stored verbatim as recorded; classes missing
from a provider's top-k response carry the -100 filler.  Values are never
renormalised at rest, and reals serialise with full round-trip precision.
Datasets are immutable after load and safe to share across concurrent runs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .policies import margin

FILLER_LOGPROB = -100.0

MANIFEST_NAME = "manifest.json"
ONLINE_NAME = "online.jsonl"
TEST_NAME = "test.jsonl"

_INSTANCE_KEYS = {"id", "text", "features", "embedding", "gold", "teacher_logprobs"}
_MANIFEST_REQUIRED = {"name", "class_names", "feature_dim", "embedding_dim", "counts"}
_MANIFEST_OPTIONAL = {"note"}


class DatasetError(Exception):
    """Malformed or inconsistent dataset content."""


@dataclass(frozen=True, eq=False)
class Instance:
    """One stream item with its recorded teacher label distribution."""

    id: str
    text: str | None
    features: np.ndarray
    embedding: np.ndarray
    gold: int
    teacher_logprobs: np.ndarray

    @property
    def teacher_label(self) -> int:
        # np.argmax breaks ties toward the lowest index, as required.
        return int(np.argmax(self.teacher_logprobs))


@dataclass(eq=False)
class Dataset:
    name: str
    class_names: list[str]
    online: list[Instance]
    test: list[Instance]
    feature_dim: int
    embedding_dim: int
    note: str | None = None

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def all_instances(self) -> Iterator[Instance]:
        yield from self.online
        yield from self.test


@dataclass(frozen=True)
class StreamOrder:
    """Seeded permutation of online-instance indices."""

    seed: int
    order: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.order)


@dataclass
class DatasetStats:
    name: str
    num_classes: int
    num_instances: int
    teacher_accuracy: float
    avg_margin: float
    avg_margin_when_wrong: float | None
    class_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "num_classes": self.num_classes,
            "num_instances": self.num_instances,
            "teacher_accuracy": self.teacher_accuracy,
            "avg_margin": self.avg_margin,
            "avg_margin_when_wrong": self.avg_margin_when_wrong,
            "class_counts": self.class_counts,
        }


def _parse_instance(record: dict, num_classes: int, feature_dim: int,
                    embedding_dim: int, where: str) -> Instance:
    keys = set(record)
    if keys != _INSTANCE_KEYS:
        missing, extra = _INSTANCE_KEYS - keys, keys - _INSTANCE_KEYS
        detail = []
        if missing:
            detail.append(f"missing keys {sorted(missing)}")
        if extra:
            detail.append(f"unknown keys {sorted(extra)}")
        raise DatasetError(f"{where}: {'; '.join(detail)}")
    inst_id = record["id"]
    if not isinstance(inst_id, str) or not inst_id:
        raise DatasetError(f"{where}: id must be a nonempty string")
    text = record["text"]
    if text is not None and not isinstance(text, str):
        raise DatasetError(f"{where}: text must be a string or null (id={inst_id})")
    features = np.asarray(record["features"], dtype=float)
    embedding = np.asarray(record["embedding"], dtype=float)
    logprobs = np.asarray(record["teacher_logprobs"], dtype=float)
    if features.ndim != 1 or features.shape[0] != feature_dim:
        raise DatasetError(
            f"{where}: expected {feature_dim} features, got {features.shape} (id={inst_id})"
        )
    if embedding.ndim != 1 or embedding.shape[0] != embedding_dim:
        raise DatasetError(
            f"{where}: expected embedding dim {embedding_dim}, got {embedding.shape} (id={inst_id})"
        )
    if np.linalg.norm(embedding) == 0.0:
        raise DatasetError(f"{where}: embedding has zero norm (id={inst_id})")
    if logprobs.ndim != 1 or logprobs.shape[0] != num_classes:
        raise DatasetError(
            f"{where}: expected {num_classes} teacher log-probs, got {logprobs.shape[0]} (id={inst_id})"
        )
    if not np.all(np.isfinite(logprobs)) or np.any(logprobs > 0.0):
        raise DatasetError(f"{where}: teacher log-probs must be finite and <= 0 (id={inst_id})")
    gold = record["gold"]
    if not isinstance(gold, int) or isinstance(gold, bool) or not 0 <= gold < num_classes:
        raise DatasetError(f"{where}: gold label out of range [0, {num_classes}) (id={inst_id})")
    features.setflags(write=False)
    embedding.setflags(write=False)
    logprobs.setflags(write=False)
    return Instance(id=inst_id, text=text, features=features, embedding=embedding,
                    gold=gold, teacher_logprobs=logprobs)


def _load_jsonl(path: str, num_classes: int, feature_dim: int, embedding_dim: int) -> list[Instance]:
    instances = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{where}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"{where}: expected a JSON object")
            instances.append(_parse_instance(record, num_classes, feature_dim, embedding_dim, where))
    return instances


def load_dataset(path: str) -> Dataset:
    """Load and fully validate a dataset directory."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise DatasetError(f"{path}: missing {MANIFEST_NAME}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{manifest_path}: malformed JSON ({exc.msg})") from exc

    keys = set(manifest)
    if not _MANIFEST_REQUIRED <= keys:
        raise DatasetError(f"{manifest_path}: missing keys {sorted(_MANIFEST_REQUIRED - keys)}")
    unknown = keys - _MANIFEST_REQUIRED - _MANIFEST_OPTIONAL
    if unknown:
        raise DatasetError(f"{manifest_path}: unknown keys {sorted(unknown)}")

    class_names = manifest["class_names"]
    if (not isinstance(class_names, list) or len(class_names) < 2
            or not all(isinstance(c, str) for c in class_names)):
        raise DatasetError(f"{manifest_path}: class_names must list at least 2 class strings")
    if len(set(class_names)) != len(class_names):
        raise DatasetError(f"{manifest_path}: duplicate class names")
    feature_dim = manifest["feature_dim"]
    embedding_dim = manifest["embedding_dim"]
    if not isinstance(feature_dim, int) or feature_dim < 1:
        raise DatasetError(f"{manifest_path}: feature_dim must be a positive integer")
    if not isinstance(embedding_dim, int) or embedding_dim < 1:
        raise DatasetError(f"{manifest_path}: embedding_dim must be a positive integer")

    num_classes = len(class_names)
    online = _load_jsonl(os.path.join(path, ONLINE_NAME), num_classes, feature_dim, embedding_dim)
    test_path = os.path.join(path, TEST_NAME)
    test = (_load_jsonl(test_path, num_classes, feature_dim, embedding_dim)
            if os.path.isfile(test_path) else [])

    counts = manifest["counts"]
    if not isinstance(counts, dict) or set(counts) != {"online", "test"}:
        raise DatasetError(f"{manifest_path}: counts must hold exactly 'online' and 'test'")
    if counts["online"] != len(online) or counts["test"] != len(test):
        raise DatasetError(
            f"{manifest_path}: counts {counts} do not match files "
            f"(online={len(online)}, test={len(test)})"
        )
    if not online:
        raise DatasetError(f"{path}: online portion is empty")

    seen: set[str] = set()
    for inst in list(online) + list(test):
        if inst.id in seen:
            raise DatasetError(f"{path}: duplicate instance id {inst.id!r}")
        seen.add(inst.id)

    return Dataset(
        name=manifest["name"],
        class_names=list(class_names),
        online=online,
        test=test,
        feature_dim=feature_dim,
        embedding_dim=embedding_dim,
        note=manifest.get("note"),
    )


def _instance_record(inst: Instance) -> dict:
    return {
        "id": inst.id,
        "text": inst.text,
        "features": [float(v) for v in inst.features],
        "embedding": [float(v) for v in inst.embedding],
        "gold": inst.gold,
        "teacher_logprobs": [float(v) for v in inst.teacher_logprobs],
    }


def save_dataset(dataset: Dataset, path: str) -> None:
    """Canonical serialization: sorted keys, compact lines, repr-exact reals."""
    os.makedirs(path, exist_ok=True)
    manifest = {
        "name": dataset.name,
        "class_names": dataset.class_names,
        "feature_dim": dataset.feature_dim,
        "embedding_dim": dataset.embedding_dim,
        "counts": {"online": len(dataset.online), "test": len(dataset.test)},
    }
    if dataset.note is not None:
        manifest["note"] = dataset.note
    _write_atomic(os.path.join(path, MANIFEST_NAME),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for fname, instances in ((ONLINE_NAME, dataset.online), (TEST_NAME, dataset.test)):
        lines = [json.dumps(_instance_record(inst), sort_keys=True, separators=(",", ":"))
                 for inst in instances]
        _write_atomic(os.path.join(path, fname), "\n".join(lines) + ("\n" if lines else ""))


def _write_atomic(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(content)
    os.replace(tmp, path)


def split_online_test(instances: Sequence[Instance], ratio: float,
                      seed: int) -> tuple[list[Instance], list[Instance]]:
    """Deterministic seeded split with |online| = round(ratio * total)."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if len(instances) == 0:
        raise ValueError("cannot split an empty instance list")
    order = np.random.default_rng(seed).permutation(len(instances))
    n_online = round(ratio * len(instances))
    online_idx = sorted(order[:n_online])
    test_idx = sorted(order[n_online:])
    return ([instances[i] for i in online_idx], [instances[i] for i in test_idx])


def make_stream(dataset: Dataset, seed: int) -> StreamOrder:
    """Seeded permutation of the online portion; identical for equal seeds."""
    if not dataset.online:
        raise ValueError("dataset has no online instances to stream")
    perm = np.random.default_rng(seed).permutation(len(dataset.online))
    return StreamOrder(seed=seed, order=tuple(int(i) for i in perm))


def stream_instances(dataset: Dataset, stream: StreamOrder) -> list[Instance]:
    return [dataset.online[i] for i in stream.order]


def dataset_stats(dataset: Dataset) -> DatasetStats:
    """Teacher accuracy and margin statistics over online + test."""
    instances = list(dataset.all_instances())
    margins = np.array([margin(inst.teacher_logprobs) for inst in instances])
    correct = np.array([inst.teacher_label == inst.gold for inst in instances])
    wrong_margins = margins[~correct]
    counts = {name: 0 for name in dataset.class_names}
    for inst in instances:
        counts[dataset.class_names[inst.gold]] += 1
    return DatasetStats(
        name=dataset.name,
        num_classes=dataset.num_classes,
        num_instances=len(instances),
        teacher_accuracy=float(np.mean(correct)),
        avg_margin=float(np.mean(margins)),
        avg_margin_when_wrong=float(np.mean(wrong_margins)) if wrong_margins.size else None,
        class_counts=counts,
    )
