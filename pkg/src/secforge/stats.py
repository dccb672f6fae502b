"""Tie-corrected Kendall rank correlation (tau-b).

Implemented with sort-based concordance counting (merge-sort inversion
counting plus tie-run corrections), O(n log n). When one side is entirely
tied the statistic is undefined and NaN is returned as a distinguished
no-signal value; callers decide how to treat it (influence scoring maps it
to 0 with a flag).
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import ValidationError


def _tie_correction(values: list) -> int:
    """Sum of t*(t-1)/2 over runs of equal values in a sorted list."""
    total = 0
    run = 1
    for i in range(1, len(values)):
        if values[i] == values[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


def _merge_count(ys: list) -> int:
    """Count strictly-decreasing inversions in ys via merge sort."""
    n = len(ys)
    if n < 2:
        return 0
    mid = n // 2
    left = ys[:mid]
    right = ys[mid:]
    count = _merge_count(left) + _merge_count(right)
    i = j = k = 0
    while i < len(left) and j < len(right):
        if right[j] < left[i]:
            count += len(left) - i
            ys[k] = right[j]
            j += 1
        else:
            ys[k] = left[i]
            i += 1
        k += 1
    while i < len(left):
        ys[k] = left[i]
        i += 1
        k += 1
    while j < len(right):
        ys[k] = right[j]
        j += 1
        k += 1
    return count


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall tau-b of two equal-length sequences (n >= 2).

    Returns NaN when either sequence is entirely tied (no rank signal).
    """
    if len(xs) != len(ys):
        raise ValidationError(f"kendall_tau: length mismatch ({len(xs)} vs {len(ys)})")
    n = len(xs)
    if n < 2:
        raise ValidationError("kendall_tau: need at least 2 observations")
    for v in xs:
        if not math.isfinite(v):
            raise ValidationError("kendall_tau: non-finite value in xs")
    for v in ys:
        if not math.isfinite(v):
            raise ValidationError("kendall_tau: non-finite value in ys")

    order = sorted(range(n), key=lambda i: (xs[i], ys[i]))
    sx = [xs[i] for i in order]
    sy = [ys[i] for i in order]

    n0 = n * (n - 1) // 2
    xtie = _tie_correction(sx)
    ytie = _tie_correction(sorted(ys))
    joint = _tie_correction(list(zip(sx, sy)))

    if n0 == xtie or n0 == ytie:
        return math.nan

    discordant = _merge_count(sy)
    con_minus_dis = n0 - xtie - ytie + joint - 2 * discordant
    tau = con_minus_dis / math.sqrt(float(n0 - xtie)) / math.sqrt(float(n0 - ytie))
    return max(-1.0, min(1.0, tau))
