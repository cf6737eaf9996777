"""Text encoders feeding the embedding strategies.

An encoder exposes a tokenizer and per-token vectors; the gateway owns the
truncation and pooling rules. Two offline encoders ship here: StubEncoder for
tests with hand-picked vectors, and HashedEncoder, a deterministic
general-purpose fallback that maps each distinct token to a fixed
pseudo-random unit vector. Pretrained contextual encoders (general or
scientific domain) plug in through the same protocol.
"""

from __future__ import annotations

import hashlib
import re
import threading
from typing import Protocol, Sequence

import numpy as np

from ..errors import ScideaError

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Split on ., !, ? followed by whitespace; whole text if no boundary."""
    parts = [part for part in _SENTENCE_BOUNDARY.split(text.strip()) if part.strip()]
    return parts if parts else [text.strip()]


class Encoder(Protocol):
    """Token-vector backend; dim is the constant output dimension."""

    id: str
    dim: int

    def tokenize(self, text: str) -> list[str]: ...

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray: ...


def _whitespace_tokenize(text: str) -> list[str]:
    return text.split()


class StubEncoder:
    """Fixed token-to-vector mapping for tests."""

    def __init__(self, id: str, mapping: dict[str, Sequence[float]], dim: int) -> None:
        self.id = id
        self.dim = dim
        self._mapping = {token: np.asarray(vec, dtype=float) for token, vec in mapping.items()}

    def tokenize(self, text: str) -> list[str]:
        return _whitespace_tokenize(text)

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray:
        rows = []
        for token in tokens:
            if token not in self._mapping:
                raise ScideaError("ENCODER_ERROR", f"stub encoder has no vector for token {token!r}", token=token)
            rows.append(self._mapping[token])
        return np.stack(rows)


class HashedEncoder:
    """Deterministic offline encoder: each token hashes to a unit vector.

    Distinct tokens land on quasi-orthogonal directions, so texts sharing
    vocabulary score high cosine similarity and disjoint texts score near
    zero, which is the shape novelty scoring needs. Vectors depend only on
    (token, dim, seed), never on process state.
    """

    def __init__(self, id: str = "hashed", dim: int = 64, seed: int = 0) -> None:
        self.id = id
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def tokenize(self, text: str) -> list[str]:
        return [token for token in re.findall(r"[a-z0-9]+", text.lower())]

    def _vector(self, token: str) -> np.ndarray:
        with self._lock:
            cached = self._cache.get(token)
        if cached is not None:
            return cached
        digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        with self._lock:
            self._cache[token] = vec
        return vec

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector(token) for token in tokens])
