"""Raw corpus loading.

A corpus is a JSONL file of items to annotate::

    {"id": str, "text": str, "gold": str | int}

`gold` may be a class name (resolved against the job's class list) or an
integer index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class CorpusItem:
    id: str
    text: str
    gold: str | int


def load_corpus(path: str) -> list[CorpusItem]:
    items: list[CorpusItem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from exc
            for key in ("id", "text", "gold"):
                if key not in record:
                    raise CorpusError(f"{where}: missing key {key!r}")
            item_id = record["id"]
            if not isinstance(item_id, str) or not item_id:
                raise CorpusError(f"{where}: id must be a nonempty string")
            if item_id in seen:
                raise CorpusError(f"{where}: duplicate id {item_id!r}")
            seen.add(item_id)
            if not isinstance(record["text"], str):
                raise CorpusError(f"{where}: text must be a string (id={item_id})")
            if not isinstance(record["gold"], (str, int)) or isinstance(record["gold"], bool):
                raise CorpusError(f"{where}: gold must be a class name or index (id={item_id})")
            items.append(CorpusItem(id=item_id, text=record["text"], gold=record["gold"]))
    return items


def resolve_gold(gold: str | int, class_names: list[str], item_id: str) -> int:
    if isinstance(gold, int):
        if not 0 <= gold < len(class_names):
            raise CorpusError(f"gold index {gold} out of range for item {item_id}")
        return gold
    try:
        return class_names.index(gold)
    except ValueError:
        raise CorpusError(
            f"unknown gold class {gold!r} for item {item_id}; expected one of {class_names}"
        ) from None
