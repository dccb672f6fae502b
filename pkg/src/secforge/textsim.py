"""Levenshtein distance and the 0-100 fuzzy ratio used for fixed-code dedup."""

from __future__ import annotations


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs (two-row DP)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[len(b)]


def fuzzy_ratio(a: str, b: str) -> int:
    """Similarity in 0..100: round(100 * (1 - lev(a, b) / max(|a|, |b|))).

    Two empty strings are identical by convention (100).
    """
    m = max(len(a), len(b))
    if m == 0:
        return 100
    return int(round(100.0 * (1.0 - levenshtein(a, b) / m)))
