from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DataError, IntegrityError
from ..tokenization import Tokenizer


@dataclass(frozen=True)
class ProviderConfig:
    """Provider registry entry.

    ``max_input_tokens`` is the per-provider input ceiling; texts longer than
    that are truncated with the configured tokenizer before submission.
    """

    name: str
    kind: str = "deterministic"  # "remote" | "deterministic"
    model_name: str = "deterministic"
    endpoint: str | None = None
    dims: int = 64
    max_batch: int = 64
    max_retries: int = 3
    timeout: float = 30.0
    max_input_tokens: int | None = 512

    def __post_init__(self):
        if self.kind not in ("remote", "deterministic"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.dims <= 0:
            raise ConfigError("provider dims must be > 0")
        if self.max_batch < 1:
            raise ConfigError("provider max_batch must be >= 1")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError(f"remote provider {self.name!r} needs an endpoint")


def normalize_rows(x) -> np.ndarray:
    """Scale rows to unit L2 norm (zero rows stay zero) and return float32."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return (x / np.where(norms == 0, 1.0, norms)).astype(np.float32)


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Embedder(ABC):
    """Maps texts to unit-norm float32 vectors, preserving input order."""

    provider: str = "embedder"
    model_name: str = "embedder"
    dims: int
    max_batch: int = 64
    max_input_tokens: int | None = None
    tokenizer: Tokenizer | None = None

    @abstractmethod
    def _embed(self, texts: list[str]) -> np.ndarray:
        """Raw vectors for one request of at most ``max_batch`` texts."""

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dims), dtype=np.float32)
        check_texts(texts)
        texts = [self._truncate(t) for t in texts]
        parts = []
        for lo in range(0, len(texts), self.max_batch):
            batch = texts[lo:lo + self.max_batch]
            raw = np.asarray(self._embed(batch), dtype=np.float64)
            if raw.ndim != 2 or raw.shape[0] != len(batch):
                raise IntegrityError(f"{self.provider}: expected {len(batch)} vectors, got shape {raw.shape}")
            if raw.shape[1] != self.dims:
                raise IntegrityError(f"{self.provider}: expected dims {self.dims}, got {raw.shape[1]}")
            parts.append(normalize_rows(raw))
        return np.concatenate(parts, axis=0)

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def _truncate(self, text: str) -> str:
        if self.tokenizer is None or self.max_input_tokens is None:
            return text
        return self.tokenizer.truncate(text, self.max_input_tokens)

    @property
    def identifier(self) -> str:
        return f"{self.provider}/{self.model_name}/{self.dims}"


def check_texts(texts: Sequence[str]) -> None:
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise DataError(f"text #{i} is empty after trimming")


def _seeded_gaussian(text: str, dims: int) -> np.ndarray:
    digest = hashlib.sha256(f"{dims}\x00{text}".encode("utf-8")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    return rng.standard_normal(dims)


def deterministic_embed(text: str, dims: int) -> np.ndarray:
    """Unit-norm Gaussian vector seeded by SHA-256 of ``(dims, text)``."""
    if dims < 2:
        raise ConfigError("deterministic embeddings need dims >= 2")
    return normalize_rows(_seeded_gaussian(text, dims))[0]


class DeterministicEmbedder(Embedder):
    """Offline embedder for tests and reproducible dry runs.

    Identical texts map to identical vectors on every platform; distinct texts
    get effectively independent random directions, so similarity carries no
    semantics.
    """

    provider = "deterministic"

    def __init__(self, dims: int = 64, model_name: str = "deterministic", max_batch: int = 256,
                 tokenizer: Tokenizer | None = None, max_input_tokens: int | None = None):
        if dims < 2:
            raise ConfigError("deterministic embeddings need dims >= 2")
        self.dims = dims
        self.model_name = model_name
        self.max_batch = max_batch
        self.tokenizer = tokenizer
        self.max_input_tokens = max_input_tokens

    def _embed(self, texts):
        return np.stack([_seeded_gaussian(t, self.dims) for t in texts])
