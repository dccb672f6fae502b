"""Text embedding clients for clustering and diversity measurement.

The embedding model behind instruction clustering is pluggable; the default
is a deterministic bag-of-character-trigram hashing embedder so no network
is ever required.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingTrigramEmbedder:
    """256-dim character-trigram counts, hashed with blake2b for stability.

    Texts are padded with sentinel boundary characters so any non-empty text
    yields at least one feature.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            padded = "\x02" + text + "\x03"
            for j in range(len(padded) - 2):
                out[i, self._bucket(padded[j : j + 3])] += 1.0
        return out


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity; zero vectors have similarity 0 with everything."""
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = vectors / safe[:, None]
    unit[norms == 0.0] = 0.0
    return unit @ unit.T
