"""Dataset directory writer implementing the simulator's external schema.

The simulator consumes a directory of manifest.json + online.jsonl +
test.jsonl; this module produces that layout without importing the simulator
package, so the file format is the only coupling between the two tools.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

FILLER_LOGPROB = -100.0


@dataclass(frozen=True)
class Record:
    """One fully prepared instance, ready for serialization."""

    id: str
    text: str | None
    features: list[float]
    embedding: list[float]
    gold: int
    teacher_logprobs: list[float]

    def to_json(self) -> str:
        payload = {
            "id": self.id,
            "text": self.text,
            "features": self.features,
            "embedding": self.embedding,
            "gold": self.gold,
            "teacher_logprobs": self.teacher_logprobs,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_atomic(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(content)
    os.replace(tmp, path)


def write_dataset_dir(
    out_dir: str,
    name: str,
    class_names: list[str],
    online: list[Record],
    test: list[Record],
    note: str | None = None,
) -> None:
    if not online:
        raise ValueError("dataset needs a nonempty online portion")
    feature_dim = len(online[0].features)
    embedding_dim = len(online[0].embedding)
    manifest = {
        "name": name,
        "class_names": list(class_names),
        "feature_dim": feature_dim,
        "embedding_dim": embedding_dim,
        "counts": {"online": len(online), "test": len(test)},
    }
    if note is not None:
        manifest["note"] = note
    os.makedirs(out_dir, exist_ok=True)
    write_atomic(os.path.join(out_dir, "manifest.json"),
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for fname, records in (("online.jsonl", online), ("test.jsonl", test)):
        lines = [r.to_json() for r in records]
        write_atomic(os.path.join(out_dir, fname),
                     "\n".join(lines) + ("\n" if lines else ""))
