"""Embedding providers behind one small contract.

Chunk texts become vectors through a provider handle: the deterministic
hash embedder keeps the whole test suite offline (identical texts embed
identically, distinct texts are near-orthogonal in expectation), while the
HTTP provider talks to whatever embedding model the deployment configures.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests


class EmbeddingError(Exception):
    """Base for embedding failures."""


class EmbeddingTransportError(EmbeddingError):
    """Retryable transport failure; message carries the attempt count."""


class EmbeddingConfigError(EmbeddingError):
    """Fatal misconfiguration, e.g. provider returned the wrong dimension."""


@dataclass(frozen=True)
class EmbeddingVector:
    dim: int
    values: tuple[float, ...]
    norm: float = 0.0

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise EmbeddingError(f"expected {self.dim} values, got {len(self.values)}")
        if self.norm == 0.0:
            object.__setattr__(self, "norm", math.sqrt(math.fsum(v * v for v in self.values)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def _text_seed(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class DeterministicHashEmbedder:
    """Unit-normalized pseudo-random Gaussian vector seeded by a 64-bit
    hash of the text. Fully offline and reproducible."""

    def __init__(self, dim: int = 64) -> None:
        if dim <= 0:
            raise EmbeddingConfigError("dim must be positive")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        vectors = []
        for text in texts:
            rng = np.random.default_rng(_text_seed(text))
            raw = rng.standard_normal(self.dim)
            raw /= np.linalg.norm(raw)
            vectors.append(EmbeddingVector(dim=self.dim, values=tuple(float(v) for v in raw)))
        return vectors


class HttpEmbedder:
    """Batch embedding over HTTP: {"texts": [...]} -> {"vectors": [[...]]}.

    Credentials come from the environment, never from code or config files.
    """

    def __init__(
        self,
        base_url: str,
        dim: int,
        *,
        model: str = "",
        timeout: float = 30.0,
        max_retries: int = 3,
        api_key_env: str = "PROVIDER_API_KEY",
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.dim = dim
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self._api_key_env = api_key_env

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        payload: dict = {"texts": list(texts)}
        if self.model:
            payload["model"] = self.model
        headers = {}
        api_key = os.environ.get(self._api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error = "no attempt made"
        for attempt in range(1, self.max_retries + 1):
            try:
                response = requests.post(
                    f"{self.base_url}/embeddings",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                rows = response.json()["vectors"]
                break
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = _scrub(str(exc), api_key)
                if attempt < self.max_retries:
                    time.sleep(min(0.1 * 2**attempt, 2.0))
        else:
            raise EmbeddingTransportError(
                f"embedding request failed after {self.max_retries} attempts: {last_error}"
            )

        vectors = []
        for row in rows:
            if len(row) != self.dim:
                raise EmbeddingConfigError(
                    f"provider returned dim {len(row)}, configured dim is {self.dim}"
                )
            vectors.append(EmbeddingVector(dim=self.dim, values=tuple(float(v) for v in row)))
        return vectors


def _scrub(message: str, secret: str) -> str:
    if secret:
        message = message.replace(secret, "***")
    return message


def embed_batch(texts: Sequence[str], provider: EmbeddingProvider) -> list[EmbeddingVector]:
    """Embed a batch, enforcing non-empty inputs and a uniform dimension."""
    if any(not t for t in texts):
        raise EmbeddingError("texts must be non-empty")
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise EmbeddingConfigError(
            f"provider returned {len(vectors)} vectors for {len(texts)} texts"
        )
    for vec in vectors:
        if vec.dim != provider.dim:
            raise EmbeddingConfigError(
                f"provider declared dim {provider.dim} but produced dim {vec.dim}"
            )
    return vectors
