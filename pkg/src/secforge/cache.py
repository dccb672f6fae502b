"""Content-addressed completion cache: append-only JSONL, immutable entries.

Keys hash the full request identity (client, model, prompt, params, sample
index), so collisions are impossible short of a digest collision and cached
runs replay byte-identically.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import canonical_dumps, content_hash, read_jsonl
from .clients import Completion, GenerationParams, TextGenClient


def cache_key(client_id: str, model: str, prompt: str, params: GenerationParams, sample_index: int) -> str:
    return content_hash(
        {
            "client_id": client_id,
            "model": model,
            "prompt": prompt,
            "params": params.to_dict(),
            "sample_index": sample_index,
        }
    )


@dataclass(frozen=True)
class CacheEntry:
    key: str
    value: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    created_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "value": self.value,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "created_at": self.created_at,
        }


class CompletionCache:
    """Concurrent readers, serialized writers; entries never change."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for row in read_jsonl(self.path):
                entry = CacheEntry(
                    key=row["key"],
                    value=row["value"],
                    prompt_tokens=row.get("prompt_tokens", 0),
                    completion_tokens=row.get("completion_tokens", 0),
                    created_at=row.get("created_at", 0.0),
                )
                self._entries.setdefault(entry.key, entry)

    def get(self, key: str) -> CacheEntry | None:
        return self._entries.get(key)

    def put(self, key: str, completion: Completion) -> CacheEntry:
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                return existing
            entry = CacheEntry(
                key=key,
                value=completion.text,
                prompt_tokens=completion.prompt_tokens,
                completion_tokens=completion.completion_tokens,
                created_at=time.time(),
            )
            self._entries[key] = entry
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(canonical_dumps(entry.to_dict()) + "\n")
            return entry

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class UsageTally:
    llm_calls: int = 0
    cache_hits: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def to_dict(self) -> dict:
        return {
            "llm_calls": self.llm_calls,
            "cache_hits": self.cache_hits,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


@dataclass
class CachingClient:
    """Cache-through wrapper; one base call fills all n sample slots."""

    base: TextGenClient
    cache: CompletionCache
    tally: UsageTally = field(default_factory=UsageTally)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def client_id(self) -> str:
        return self.base.client_id

    @property
    def model(self) -> str:
        return self.base.model

    def complete(self, prompt: str, params: GenerationParams) -> list[Completion]:
        keys = [
            cache_key(self.base.client_id, self.base.model, prompt, params, i)
            for i in range(params.n_samples)
        ]
        cached = [self.cache.get(k) for k in keys]
        if all(entry is not None for entry in cached):
            with self._lock:
                self.tally.cache_hits += 1
            return [
                Completion(text=e.value, prompt_tokens=e.prompt_tokens, completion_tokens=e.completion_tokens)
                for e in cached  # type: ignore[union-attr]
            ]
        completions = self.base.complete(prompt, params)
        with self._lock:
            self.tally.llm_calls += 1
            for c in completions:
                self.tally.prompt_tokens += c.prompt_tokens
                self.tally.completion_tokens += c.completion_tokens
        out = []
        for i, key in enumerate(keys):
            completion = completions[i] if i < len(completions) else Completion(text="")
            entry = self.cache.put(key, completion)
            out.append(
                Completion(text=entry.value, prompt_tokens=entry.prompt_tokens, completion_tokens=entry.completion_tokens)
            )
        return out


def llm_call(client, prompt: str, params: GenerationParams) -> list[Completion]:
    """Single entry point the stages use; the client is already wrapped with
    caching and retries by the pipeline."""
    return client.complete(prompt, params)
