"""Seeded k-means with k-means++ initialization.

Uses the legacy frozen RandomState stream so center initialization is
byte-reproducible across machines and numpy releases. 50 iterations and a
1e-6 center-shift tolerance are fixed policy, not tunables.
"""

from __future__ import annotations

import numpy as np

MAX_ITER = 50
TOL = 1e-6


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp_init(points: np.ndarray, k: int, rs: np.random.RandomState) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    first = rs.randint(n)
    centers[0] = points[first]
    d2 = np.einsum("ij,ij->i", points - centers[0], points - centers[0])
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rs.randint(n)
        else:
            idx = int(rs.choice(n, p=d2 / total))
        centers[c] = points[idx]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", points - centers[c], points - centers[c]))
    return centers


def kmeans(points: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Cluster *points* into k groups; returns (centers, labels).

    Deterministic given (points, k, seed). Empty clusters are reseeded to the
    point currently farthest from its assigned center.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"kmeans: need 1 <= k <= n, got k={k}, n={n}")
    rs = np.random.RandomState(seed)
    centers = _kmeanspp_init(points, k, rs)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(MAX_ITER):
        d2 = _pairwise_sq_dists(points, centers)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = points[labels == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
            else:
                assigned = d2[np.arange(n), labels]
                new_centers[c] = points[int(np.argmax(assigned))]
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < TOL:
            break
    d2 = _pairwise_sq_dists(points, centers)
    labels = np.argmin(d2, axis=1)
    return centers, labels


def representative_indices(points: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> list[int]:
    """Per cluster, the index of the member nearest (Euclidean) to the mean.

    Clusters are keyed by the mean of their *members* (not the final center),
    matching "the member closest to the cluster mean". Ties keep the lowest
    index. Empty clusters contribute nothing.
    """
    chosen: list[int] = []
    for c in range(centers.shape[0]):
        member_idx = np.flatnonzero(labels == c)
        if len(member_idx) == 0:
            continue
        members = points[member_idx]
        mean = members.mean(axis=0)
        d2 = np.einsum("ij,ij->i", members - mean, members - mean)
        chosen.append(int(member_idx[int(np.argmin(d2))]))
    return chosen
