"""Reference-free preference loss with length-normalized log-probs.

Pure functions over trainer-exported (log-prob, token-count) pairs; this
module never tokenizes, so lengths always come from the trainer that
produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .canonical import read_jsonl
from .errors import ValidationError


@dataclass(frozen=True)
class PairLogProb:
    """Sum log-probs and token counts of one chosen/rejected pair."""

    row_id: str
    logp_w: float
    len_w: int
    logp_l: float
    len_l: int

    def __post_init__(self):
        if self.len_w <= 0 or self.len_l <= 0:
            raise ValidationError(f"row {self.row_id!r}: token counts must be positive")
        for v in (self.logp_w, self.logp_l):
            if not math.isfinite(v):
                raise ValidationError(f"row {self.row_id!r}: non-finite log-prob")

    @property
    def unnormalized(self) -> bool:
        """Positive "log-probs" indicate unnormalized trainer scores."""
        return self.logp_w > 0.0 or self.logp_l > 0.0

    def to_dict(self) -> dict:
        return {
            "row_id": self.row_id,
            "logp_w": self.logp_w,
            "len_w": self.len_w,
            "logp_l": self.logp_l,
            "len_l": self.len_l,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairLogProb":
        return cls(
            row_id=d["row_id"],
            logp_w=float(d["logp_w"]),
            len_w=int(d["len_w"]),
            logp_l=float(d["logp_l"]),
            len_l=int(d["len_l"]),
        )


def softplus(x: float) -> float:
    """log(1 + exp(x)) with the large-|x| branch split for stability."""
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def simpo_margin(p: PairLogProb, beta: float, gamma: float) -> float:
    return beta * (p.logp_w / p.len_w) - beta * (p.logp_l / p.len_l) - gamma


def simpo_loss(p: PairLogProb, beta: float, gamma: float) -> float:
    """-log sigmoid(beta/|y_w| * logp_w - beta/|y_l| * logp_l - gamma)."""
    if beta <= 0.0:
        raise ValidationError("simpo_loss: beta must be > 0")
    return softplus(-simpo_margin(p, beta, gamma))


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def simpo_loss_grad_w(p: PairLogProb, beta: float, gamma: float) -> float:
    """Analytic d(loss)/d(logp_w) = -(beta/len_w) * sigmoid(-margin)."""
    m = simpo_margin(p, beta, gamma)
    return -(beta / p.len_w) * _sigmoid(-m)


@dataclass(frozen=True)
class LossSummary:
    mean: float
    p10: float
    p50: float
    p90: float
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "p10": self.p10, "p50": self.p50, "p90": self.p90, "n": self.n}


def dataset_loss(rows: Sequence[PairLogProb], beta: float, gamma: float) -> LossSummary:
    if not rows:
        raise ValidationError("dataset_loss: empty input")
    losses = [simpo_loss(r, beta, gamma) for r in rows]
    p10, p50, p90 = np.percentile(np.asarray(losses, dtype=np.float64), [10.0, 50.0, 90.0])
    return LossSummary(
        mean=math.fsum(losses) / len(losses),
        p10=float(p10),
        p50=float(p50),
        p90=float(p90),
        n=len(losses),
    )


def load_pairlogprobs(path: str | Path) -> tuple[list[PairLogProb], list[str]]:
    """Load trainer-exported rows; unnormalized scores are flagged, not fatal."""
    rows: list[PairLogProb] = []
    warnings: list[str] = []
    for d in read_jsonl(path):
        row = PairLogProb.from_dict(d)
        if row.unnormalized:
            warnings.append(f"row {row.row_id!r}: positive log-prob (unnormalized score?)")
        rows.append(row)
    return rows, warnings


def loss_report(rows: Iterable[PairLogProb], beta: float, gamma: float, warnings: list[str] | None = None) -> dict:
    summary = dataset_loss(list(rows), beta, gamma)
    return {
        "objective": "simpo",
        "beta": beta,
        "gamma": gamma,
        "summary": summary.to_dict(),
        "warnings": list(warnings or []),
    }
