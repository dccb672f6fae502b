"""Preference objectives on (log-prob, length) pairs.

Each objective returns (loss, d/dlogp_w, d/dlogp_l); reference log-probs,
where needed, come from the frozen base model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

OBJECTIVES = ("simpo", "dpo", "ipo", "orpo")

_P_EPS = 1e-9


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@dataclass(frozen=True)
class PairInput:
    logp_w: float
    len_w: int
    logp_l: float
    len_l: int
    ref_logp_w: float = 0.0
    ref_logp_l: float = 0.0


def simpo(p: PairInput, beta: float, gamma: float) -> tuple[float, float, float]:
    margin = beta * (p.logp_w / p.len_w) - beta * (p.logp_l / p.len_l) - gamma
    loss = _softplus(-margin)
    dm = -_sigmoid(-margin)
    return loss, dm * beta / p.len_w, -dm * beta / p.len_l


def dpo(p: PairInput, beta: float) -> tuple[float, float, float]:
    margin = beta * ((p.logp_w - p.ref_logp_w) - (p.logp_l - p.ref_logp_l))
    loss = _softplus(-margin)
    dm = -_sigmoid(-margin)
    return loss, dm * beta, -dm * beta


def ipo(p: PairInput, tau: float) -> tuple[float, float, float]:
    h = (p.logp_w - p.ref_logp_w) - (p.logp_l - p.ref_logp_l)
    target = 1.0 / (2.0 * tau)
    loss = (h - target) ** 2
    dh = 2.0 * (h - target)
    return loss, dh, -dh


def orpo(p: PairInput, lam: float) -> tuple[float, float, float]:
    """NLL on the win side plus a log-odds-ratio penalty, both length-normalized."""
    p_w = min(max(math.exp(p.logp_w / p.len_w), _P_EPS), 1.0 - _P_EPS)
    p_l = min(max(math.exp(p.logp_l / p.len_l), _P_EPS), 1.0 - _P_EPS)
    z = (math.log(p_w) - math.log1p(-p_w)) - (math.log(p_l) - math.log1p(-p_l))
    loss = -p.logp_w / p.len_w + lam * _softplus(-z)
    dz = -_sigmoid(-z)
    d_w = -1.0 / p.len_w + lam * dz * (1.0 / (1.0 - p_w)) / p.len_w
    d_l = -lam * dz * (1.0 / (1.0 - p_l)) / p.len_l
    return loss, d_w, d_l


def evaluate(objective: str, p: PairInput, beta: float, gamma: float | None) -> tuple[float, float, float]:
    if objective == "simpo":
        if gamma is None:
            raise ValueError("simpo requires gamma")
        return simpo(p, beta, gamma)
    if objective == "dpo":
        return dpo(p, beta)
    if objective == "ipo":
        return ipo(p, beta)
    if objective == "orpo":
        return orpo(p, beta)
    raise ValueError(f"unknown objective {objective!r}")
