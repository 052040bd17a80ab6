"""Provider tokenizer abstraction and class-token validation.

Completion APIs apply logit bias per token id, so every class must map to
exactly one token.  Jobs are validated up front: a class string that the
tokenizer splits into several tokens is rejected with guidance, before any
money is spent.

The built-in reference tokenizer mirrors the relevant behaviour of
byte-pair vocabularies for this use case: a single word with one leading
space is one token.  Its ids are stable hashes, so rendered requests are
reproducible everywhere; plug a provider tokenizer for production ids.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol


class TokenizerError(Exception):
    pass


class Tokenizer(Protocol):
    def encode(self, text: str) -> list[int]:
        """Token ids for `text`."""


class ReferenceTokenizer:
    """Deterministic stand-in: ` word` is one token, ids are stable hashes."""

    VOCAB_SIZE = 50_000
    _PIECE = re.compile(r" ?[^ ]+")

    def encode(self, text: str) -> list[int]:
        return [self._token_id(piece) for piece in self._PIECE.findall(text)]

    @staticmethod
    def _token_id(piece: str) -> int:
        digest = hashlib.sha1(piece.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") % ReferenceTokenizer.VOCAB_SIZE


def validate_class_tokens(class_tokens: list[str], tokenizer: Tokenizer) -> dict[str, int]:
    """Map each class token string to its single token id.

    Raises TokenizerError when a class spans multiple tokens (with guidance)
    or when two classes collide on the same id.
    """
    mapping: dict[str, int] = {}
    for token in class_tokens:
        ids = tokenizer.encode(token)
        if len(ids) != 1:
            raise TokenizerError(
                f"class token {token!r} maps to {len(ids)} tokens; logit bias needs "
                "exactly one token per class. Use a single-word class label with a "
                "leading space (e.g. ' positive')."
            )
        mapping[token] = ids[0]
    if len(set(mapping.values())) != len(mapping):
        raise TokenizerError(f"class tokens collide after tokenization: {class_tokens}")
    return mapping
