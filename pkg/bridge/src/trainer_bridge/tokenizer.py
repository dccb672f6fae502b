"""Deterministic hashing tokenizer for the toy preference model.

Words and punctuation map to fixed vocab buckets via blake2b, so token ids
never depend on process state or corpus order. Id 0 is reserved for BOS.
"""

from __future__ import annotations

import hashlib
import re

_TOKEN_RE = re.compile(r"[a-z0-9_]+|[^\sa-z0-9_]")

BOS = 0


class HashingTokenizer:
    def __init__(self, vocab_size: int = 48):
        if vocab_size < 4:
            raise ValueError("vocab_size must be >= 4")
        self.vocab_size = vocab_size
        self.unk = vocab_size - 1

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        # ids 1..vocab_size-1; 0 stays BOS
        return int.from_bytes(digest, "big") % (self.vocab_size - 1) + 1

    def encode(self, text: str) -> list[int]:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            return [self.unk]
        return [self._bucket(t) for t in tokens]
