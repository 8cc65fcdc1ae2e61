"""Token embedders used by the embedding-similarity signal.

Default is a deterministic character-trigram hashing embedder (subword behavior with no
external assets); a loader for word-vector text files is provided for pre-trained vectors.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

DEFAULT_DIM = 64


class TrigramHashEmbedder:
    """Sum of fixed pseudo-random vectors, one per character trigram of the padded token."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self._trigram_cache: dict[str, np.ndarray] = {}

    def _trigram_vector(self, trigram: str) -> np.ndarray:
        vec = self._trigram_cache.get(trigram)
        if vec is None:
            seed = int.from_bytes(hashlib.blake2b(trigram.encode("utf-8"), digest_size=8).digest(), "little")
            vec = np.random.RandomState(seed % (2**32)).standard_normal(self.dim)
            self._trigram_cache[trigram] = vec
        return vec

    def embed(self, token: str) -> np.ndarray:
        padded = f"^{token}$"
        total = np.zeros(self.dim)
        for i in range(len(padded) - 2):
            total += self._trigram_vector(padded[i:i + 3])
        norm = np.linalg.norm(total)
        if norm > 0:
            total = total / norm
        return total


class WordVectorEmbedder:
    """Embeddings from a text file: header line `count dim`, then `token v1..v_dim` lines."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    @classmethod
    def load(cls, path: str | Path) -> "WordVectorEmbedder":
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as f:
            header = f.readline().split()
            if len(header) != 2:
                raise ValueError(f"malformed word-vector header in {path}")
            dim = int(header[1])
            for line in f:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    continue
                vectors[parts[0]] = np.array(parts[1:], dtype=float)
        return cls(vectors, dim)

    def embed(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            return np.zeros(self.dim)
        return vec
