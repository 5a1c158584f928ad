"""Embedding providers.

Two providers implement the same contract: map text to a unit-norm vector
of a fixed dimension. The hashed bag-of-tokens provider is fully
deterministic and needs no network; the remote provider calls an HTTP
embedding endpoint. Every vector returned by a provider is L2-normalized,
which the vector store relies on.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import numpy as np
import requests

from .errors import BackendError
from .signals import tokenize

DEFAULT_DIMENSION = 768


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Anything that can turn text into a unit-norm vector."""

    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedBagEmbedder:
    """Deterministic token-bag embedding for offline runs and tests.

    Each token is hashed, together with the seed, onto one coordinate and
    contributes a unit of mass there; the accumulated vector is then
    L2-normalized. Contributions are non-negative, so cosine similarity
    between any two texts is in [0, 1] and grows with token overlap.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = 0):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _coordinate(self, token: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dimension

    def embed(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vector = np.zeros(self.dimension, dtype=np.float64)
        # An empty token bag still has to produce a unit vector.
        tokens = tokenize(text).tokens or ("",)
        for token in tokens:
            vector[self._coordinate(token)] += 1.0
        vector /= np.linalg.norm(vector)
        vector.setflags(write=False)
        self._cache[text] = vector
        return vector


class RemoteEmbedder:
    """Embedding client for an HTTP endpoint; retries each request once."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int = DEFAULT_DIMENSION,
        timeout_ms: int = 30_000,
    ):
        if not endpoint:
            raise ValueError("remote embedding provider requires an endpoint")
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.timeout_s = timeout_ms / 1000.0

    def embed(self, text: str) -> np.ndarray:
        body = {"model": self.model, "input": text}
        last_error: Exception | None = None
        for _ in range(2):
            try:
                response = requests.post(self.endpoint, json=body, timeout=self.timeout_s)
                response.raise_for_status()
                return self._to_vector(response.json())
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
        raise BackendError("embedding", f"request failed after retry: {last_error}")

    def _to_vector(self, data: object) -> np.ndarray:
        values = _extract_embedding(data)
        if values is None:
            raise BackendError("embedding", "unrecognized response shape")
        vector = np.asarray(values, dtype=np.float64)
        if vector.shape != (self.dimension,):
            raise BackendError(
                "embedding",
                f"expected dimension {self.dimension}, got {vector.shape}",
            )
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise BackendError("embedding", "endpoint returned a zero vector")
        vector = vector / norm
        vector.setflags(write=False)
        return vector


def _extract_embedding(data: object) -> list[float] | None:
    if not isinstance(data, dict):
        return None
    if isinstance(data.get("embedding"), list):
        return data["embedding"]
    items = data.get("data")
    if isinstance(items, list) and items and isinstance(items[0], dict):
        if isinstance(items[0].get("embedding"), list):
            return items[0]["embedding"]
    return None


def embed(text: str, provider: EmbeddingProvider) -> np.ndarray:
    """Embed text, checking the provider honored its dimension contract."""
    vector = provider.embed(text)
    if vector.shape != (provider.dimension,):
        raise ValueError(
            f"provider returned shape {vector.shape}, expected ({provider.dimension},)"
        )
    return vector
