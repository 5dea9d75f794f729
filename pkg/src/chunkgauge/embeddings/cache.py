"""Content-addressed on-disk embedding cache.

Layout: ``<root>/<provider>/<model>/<hh>/<sha256>`` where each file is a
16-byte little-endian header (magic, version, dims, crc32 of the payload)
followed by ``dims`` little-endian float32 values.
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Sequence

import numpy as np

from .base import Embedder, check_texts, content_hash

MAGIC = b"CGEV"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


class EmbeddingCache:
    """Safe for concurrent readers; concurrent writers of one key race benignly
    because values are deterministic per key and writes are atomic renames."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path(self, provider: str, model: str, text: str) -> Path:
        h = content_hash(text)
        return self.root / _UNSAFE.sub("_", provider) / _UNSAFE.sub("_", model) / h[:2] / h

    def get(self, provider: str, model: str, text: str) -> np.ndarray | None:
        path = self.path(provider, model, text)
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            return None
        vec = _decode(raw)
        if vec is None:
            path.unlink(missing_ok=True)
        return vec

    def put(self, provider: str, model: str, text: str, vector: np.ndarray) -> None:
        path = self.path(provider, model, text)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = np.ascontiguousarray(vector, dtype="<f4").tobytes()
        header = _HEADER.pack(MAGIC, VERSION, len(data) // 4, zlib.crc32(data))
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(header + data)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


def _decode(raw: bytes) -> np.ndarray | None:
    if len(raw) < _HEADER.size:
        return None
    magic, version, dims, crc = _HEADER.unpack_from(raw)
    payload = raw[_HEADER.size:]
    if magic != MAGIC or version != VERSION or len(payload) != 4 * dims or zlib.crc32(payload) != crc:
        return None
    return np.frombuffer(payload, dtype="<f4").astype(np.float32)


class CachedEmbedder(Embedder):
    """Wraps an embedder; hits are served from disk, misses are embedded and stored."""

    def __init__(self, inner: Embedder, cache: EmbeddingCache):
        self.inner = inner
        self.cache = cache
        self.provider = inner.provider
        self.model_name = inner.model_name
        self.dims = inner.dims

    def _embed(self, texts):  # pragma: no cover - embed_batch is overridden
        return self.inner._embed(texts)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dims), dtype=np.float32)
        check_texts(texts)
        out: list[np.ndarray | None] = []
        for t in texts:
            v = self.cache.get(self.provider, self.model_name, t)
            out.append(v if v is not None and v.shape == (self.dims,) else None)
        misses = sorted({t for t, v in zip(texts, out) if v is None})
        if misses:
            fresh = dict(zip(misses, self.inner.embed_batch(misses)))
            for t, v in fresh.items():
                self.cache.put(self.provider, self.model_name, t, v)
            out = [fresh[t] if v is None else v for t, v in zip(texts, out)]
        return np.stack(out).astype(np.float32, copy=False)
