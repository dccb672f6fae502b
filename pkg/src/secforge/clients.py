"""Text-generation clients: an OpenAI-compatible HTTP client and a scripted
deterministic mock keyed by prompt substrings.

Every client exposes ``complete(prompt, params) -> list[Completion]`` and a
stable ``client_id``/``model`` used in cache keys. Without FORGE_API_BASE and
FORGE_API_KEY in the environment, only the mock is constructible.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

from .canonical import text_hash
from .errors import (
    ConfigurationError,
    PermanentClientError,
    RetriesExhaustedError,
    TransientClientError,
    ValidationError,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "FORGE_API_KEY"
API_BASE_ENV = "FORGE_API_BASE"


@dataclass(frozen=True)
class GenerationParams:
    """Sampling knobs; the seed pins mock behavior and cache identity exactly."""

    temperature: float = 0.8
    top_p: float = 0.95
    max_tokens: int = 1024
    n_samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValidationError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValidationError("max_tokens must be > 0")
        if self.n_samples <= 0:
            raise ValidationError("n_samples must be > 0")

    def with_n(self, n: int) -> "GenerationParams":
        return replace(self, n_samples=n)

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


class TextGenClient(Protocol):
    client_id: str
    model: str

    def complete(self, prompt: str, params: GenerationParams) -> list[Completion]: ...


def _approx_tokens(text: str) -> int:
    # Fixed 4-chars-per-token reckoning keeps mock cost tallies deterministic.
    return max(1, len(text) // 4) if text else 0


@dataclass(frozen=True)
class MockRule:
    contains: str
    completions: tuple[str, ...]


class ScriptedMockClient:
    """Stateless mock: first rule whose substring appears in the prompt wins.

    Sample ``i`` gets ``completions[i % len(completions)]`` so the mapping from
    (prompt, params, index) to text never depends on call order.
    """

    client_id = "scripted-mock"

    def __init__(self, rules: Sequence[MockRule], default: Sequence[str] | None = None, model: str = "mock-model"):
        self.rules = list(rules)
        self.default = tuple(default) if default is not None else None
        self.model = model

    @classmethod
    def from_script_file(cls, path: str | Path) -> "ScriptedMockClient":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        rules = [MockRule(contains=r["contains"], completions=tuple(r["completions"])) for r in data.get("rules", [])]
        return cls(rules, default=data.get("default"), model=data.get("model", "mock-model"))

    def _completions_for(self, prompt: str) -> tuple[str, ...]:
        for rule in self.rules:
            if rule.contains in prompt:
                return rule.completions
        if self.default is not None:
            return self.default
        raise PermanentClientError(f"mock script has no rule for prompt hash {text_hash(prompt)[:12]}")

    def complete(self, prompt: str, params: GenerationParams) -> list[Completion]:
        texts = self._completions_for(prompt)
        out = []
        for i in range(params.n_samples):
            text = texts[i % len(texts)] if texts else ""
            out.append(
                Completion(
                    text=text,
                    prompt_tokens=_approx_tokens(prompt),
                    completion_tokens=_approx_tokens(text),
                )
            )
        return out


class HttpChatClient:
    """Minimal OpenAI-compatible chat-completions client over urllib."""

    client_id = "http-openai-compatible"

    def __init__(self, model: str, api_base: str | None = None, api_key: str | None = None, timeout: float = 120.0):
        self.model = model
        self.api_base = api_base or os.environ.get(API_BASE_ENV)
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        if not self.api_base or not self.api_key:
            raise ConfigurationError(
                f"live client needs {API_BASE_ENV} and {API_KEY_ENV} in the environment (mock-only mode otherwise)"
            )

    def complete(self, prompt: str, params: GenerationParams) -> list[Completion]:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
            "n": params.n_samples,
            "seed": params.seed,
        }
        req = urllib.request.Request(
            self.api_base.rstrip("/") + "/chat/completions",
            data=json.dumps(payload).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if 400 <= exc.code < 500 and exc.code != 429:
                raise PermanentClientError(
                    f"HTTP {exc.code} for prompt hash {text_hash(prompt)[:12]}"
                ) from exc
            raise TransientClientError(f"HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransientClientError(str(exc)) from exc
        usage = body.get("usage", {})
        n = max(1, len(body.get("choices", [])))
        return [
            Completion(
                text=choice.get("message", {}).get("content", "") or "",
                prompt_tokens=int(usage.get("prompt_tokens", 0)) // n,
                completion_tokens=int(usage.get("completion_tokens", 0)) // n,
            )
            for choice in body.get("choices", [])
        ]


@dataclass
class RetryingClient:
    """Bounded retries with exponential backoff around transient failures."""

    base: TextGenClient
    retries: int = 3
    backoff: float = 0.25
    sleep: object = time.sleep
    last_attempts: int = field(default=0, init=False)

    @property
    def client_id(self) -> str:
        return self.base.client_id

    @property
    def model(self) -> str:
        return self.base.model

    def complete(self, prompt: str, params: GenerationParams) -> list[Completion]:
        delay = self.backoff
        for attempt in range(1, self.retries + 1):
            self.last_attempts = attempt
            try:
                return self.base.complete(prompt, params)
            except TransientClientError as exc:
                if attempt == self.retries:
                    raise RetriesExhaustedError(
                        f"giving up after {attempt} attempts: {exc}", attempts=attempt
                    ) from exc
                log.warning("transient client failure (attempt %d/%d): %s", attempt, self.retries, exc)
                self.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")
