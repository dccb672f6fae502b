"""Toy autoregressive preference model with low-rank adapters.

Next-token logits condition on the previous token (bigram table) and on a
bag-of-tokens summary of the prompt:

    logits(prev, ctx) = (W0 + s*Aw@Bw)[prev] + ctx @ (C0 + s*Ac@Bc)

with s = alpha / rank. The base tables W0/C0 are frozen at seeded-random
values; only the adapter factors train. Bw/Bc start at zero, so the initial
model equals the base model (which doubles as the frozen reference for
reference-based objectives).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tokenizer import BOS, HashingTokenizer


def _seed_from_ref(model_ref: str) -> int:
    return int.from_bytes(hashlib.sha256(model_ref.encode("utf-8")).digest()[:4], "big")


@dataclass
class SequenceGrad:
    """d(sum log-prob)/d(effective tables), before the adapter chain rule."""

    g_w: np.ndarray  # (V, V)
    g_c: np.ndarray  # (V, V)


class ToyPrefLM:
    def __init__(self, model_ref: str = "toy-v1", vocab_size: int = 48, rank: int = 8, alpha: int = 16):
        if rank < 1 or alpha < 1:
            raise ValueError("rank and alpha must be >= 1")
        self.model_ref = model_ref
        self.tokenizer = HashingTokenizer(vocab_size)
        self.vocab_size = vocab_size
        self.rank = rank
        self.alpha = alpha
        self.scale = alpha / rank
        rs = np.random.RandomState(_seed_from_ref(model_ref))
        v = vocab_size
        self.w0 = rs.normal(0.0, 0.1, size=(v, v))
        self.c0 = rs.normal(0.0, 0.1, size=(v, v))
        self.a_w = rs.normal(0.0, 0.05, size=(v, rank))
        self.b_w = np.zeros((rank, v))
        self.a_c = rs.normal(0.0, 0.05, size=(v, rank))
        self.b_c = np.zeros((rank, v))

    # --- parameter plumbing -------------------------------------------------

    def adapter_state(self) -> dict[str, np.ndarray]:
        return {"a_w": self.a_w, "b_w": self.b_w, "a_c": self.a_c, "b_c": self.b_c}

    def load_adapter_state(self, state: dict[str, np.ndarray]) -> None:
        for name in ("a_w", "b_w", "a_c", "b_c"):
            setattr(self, name, np.array(state[name], dtype=np.float64))

    def meta(self) -> dict:
        return {
            "model_ref": self.model_ref,
            "vocab_size": self.vocab_size,
            "rank": self.rank,
            "alpha": self.alpha,
        }

    def save_checkpoint(self, path: str | Path, step: int) -> None:
        np.savez(
            path,
            step=np.int64(step),
            meta=np.frombuffer(json.dumps(self.meta()).encode("utf-8"), dtype=np.uint8),
            **self.adapter_state(),
        )

    @classmethod
    def load_checkpoint(cls, path: str | Path) -> tuple["ToyPrefLM", int]:
        data = np.load(path)
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        model = cls(
            model_ref=meta["model_ref"],
            vocab_size=meta["vocab_size"],
            rank=meta["rank"],
            alpha=meta["alpha"],
        )
        model.load_adapter_state({k: data[k] for k in ("a_w", "b_w", "a_c", "b_c")})
        return model, int(data["step"])

    # --- forward / backward ---------------------------------------------------

    def _tables(self, base_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
        if base_only:
            return self.w0, self.c0
        return self.w0 + self.scale * (self.a_w @ self.b_w), self.c0 + self.scale * (self.a_c @ self.b_c)

    def _context(self, prompt_tokens: list[int]) -> np.ndarray:
        ctx = np.zeros(self.vocab_size)
        for t in prompt_tokens:
            ctx[t] += 1.0
        return ctx / max(1, len(prompt_tokens))

    def sequence_logprob(
        self,
        prompt_tokens: list[int],
        response_tokens: list[int],
        base_only: bool = False,
        want_grad: bool = False,
    ) -> tuple[float, SequenceGrad | None]:
        """Sum log pi(response | prompt); optionally the table gradients."""
        w, c = self._tables(base_only)
        ctx = self._context(prompt_tokens)
        ctx_bias = ctx @ c
        total = 0.0
        g_w = np.zeros_like(w) if want_grad else None
        delta_sum = np.zeros(self.vocab_size) if want_grad else None
        prev = BOS
        for tok in response_tokens:
            logits = w[prev] + ctx_bias
            shifted = logits - logits.max()
            log_z = np.log(np.exp(shifted).sum()) + logits.max()
            total += float(logits[tok] - log_z)
            if want_grad:
                probs = np.exp(logits - log_z)
                delta = -probs
                delta[tok] += 1.0
                g_w[prev] += delta
                delta_sum += delta
            prev = tok
        grad = None
        if want_grad:
            grad = SequenceGrad(g_w=g_w, g_c=np.outer(ctx, delta_sum))
        return total, grad

    def logprob(self, prompt: str, response: str, base_only: bool = False) -> tuple[float, int]:
        """(sum log-prob, token count) under the current adapters."""
        x = self.tokenizer.encode(prompt)
        y = self.tokenizer.encode(response)
        total, _ = self.sequence_logprob(x, y, base_only=base_only)
        return total, len(y)

    def mean_logprob(self, prompt: str, response: str) -> float:
        total, length = self.logprob(prompt, response)
        return total / length

    # --- adapter updates ---------------------------------------------------------

    def apply_table_grads(self, g_w: np.ndarray, g_c: np.ndarray, lr: float) -> None:
        """Chain table-space gradients through the low-rank factors and step.

        Gradients are for maximizing log-likelihood terms already signed as
        "descend", i.e. callers pass dLoss/dTable and we subtract lr * grad.
        """
        d_aw = self.scale * (g_w @ self.b_w.T)
        d_bw = self.scale * (self.a_w.T @ g_w)
        d_ac = self.scale * (g_c @ self.b_c.T)
        d_bc = self.scale * (self.a_c.T @ g_c)
        self.a_w -= lr * d_aw
        self.b_w -= lr * d_bw
        self.a_c -= lr * d_ac
        self.b_c -= lr * d_bc
