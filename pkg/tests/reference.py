"""Independent reference implementations used as test oracles.

These deliberately take the brute-force road (full pair enumeration, full DP
matrix) so they share no code path with the production implementations they
check.
"""

from __future__ import annotations

import math

import numpy as np


def kendall_tau_bruteforce(xs, ys) -> float:
    """Tau-b via O(n^2) enumeration of every pair's sign product."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(len(x), k=1)
    num = float(np.sum(dx[iu] * dy[iu]))
    nx = float(np.sum(dx[iu] != 0))
    ny = float(np.sum(dy[iu] != 0))
    if nx == 0 or ny == 0:
        return math.nan
    return num / math.sqrt(nx) / math.sqrt(ny)


def levenshtein_matrix(a: str, b: str) -> int:
    """Textbook full-matrix dynamic program."""
    m, n = len(a), len(b)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dist[i][0] = i
    for j in range(n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            dist[i][j] = min(dist[i - 1][j] + 1, dist[i][j - 1] + 1, dist[i - 1][j - 1] + cost)
    return dist[m][n]


def fuzzy_ratio_reference(a: str, b: str) -> int:
    m = max(len(a), len(b))
    if m == 0:
        return 100
    return int(round(100.0 * (1.0 - levenshtein_matrix(a, b) / m)))


def simpo_loss_scalar(logp_w: float, len_w: int, logp_l: float, len_l: int, beta: float, gamma: float) -> float:
    """Direct scalar evaluation of -log(sigmoid(margin)) via log1p."""
    margin = beta * logp_w / len_w - beta * logp_l / len_l - gamma
    return math.log1p(math.exp(-margin)) if margin > 0 else -margin + math.log1p(math.exp(margin))
