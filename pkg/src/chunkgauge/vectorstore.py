"""Exact cosine top-k search over unit-normalized vectors."""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, IntegrityError

SNAPSHOT_MAGIC = b"CGVI"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dims, count
_NORM_TOL = 1e-6


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0:
        raise IntegrityError("cannot index or query a zero vector")
    return v / norm


class VectorIndex:
    """Brute-force index: insert while building, :meth:`freeze`, then search.

    Vectors are stored as float32. Scores are dot products of the stored
    vectors with the normalized query, accumulated in float64. Ties in score
    are broken by ascending ``chunk_id`` so rankings are reproducible.
    Searching a frozen index is read-only and safe from multiple threads.
    """

    def __init__(self, dims: int):
        if dims < 1:
            raise ConfigError("dims must be >= 1")
        self.dims = dims
        self._ids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._seen: set[str] = set()
        self.frozen = False
        self._matrix: np.ndarray | None = None
        self._id_rank: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def insert(self, chunk_id: str, vector) -> None:
        if self.frozen:
            raise IntegrityError("index is frozen")
        if chunk_id in self._seen:
            raise IntegrityError(f"duplicate chunk id {chunk_id!r}")
        v = np.asarray(vector, dtype=np.float64).ravel()
        if v.shape[0] != self.dims:
            raise IntegrityError(f"expected {self.dims} dims, got {v.shape[0]}")
        if abs(np.linalg.norm(v) - 1.0) > _NORM_TOL:
            v = _unit(v)
        self._seen.add(chunk_id)
        self._ids.append(chunk_id)
        self._rows.append(v.astype(np.float32))

    def insert_many(self, chunk_ids: Sequence[str], vectors) -> None:
        vectors = np.asarray(vectors)
        if len(chunk_ids) != len(vectors):
            raise IntegrityError("chunk_ids and vectors differ in length")
        for cid, v in zip(chunk_ids, vectors):
            self.insert(cid, v)

    def freeze(self) -> "VectorIndex":
        if not self.frozen:
            self._matrix = (np.stack(self._rows) if self._rows
                            else np.zeros((0, self.dims), dtype=np.float32))
            self._rows = []
            order = sorted(range(len(self._ids)), key=self._ids.__getitem__)
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order))
            self._id_rank = rank
            self.frozen = True
        return self

    @property
    def matrix(self) -> np.ndarray:
        self._require_frozen()
        return self._matrix

    def _require_frozen(self):
        if not self.frozen:
            raise IntegrityError("freeze() the index before searching")

    def scores(self, query) -> np.ndarray:
        self._require_frozen()
        q = np.asarray(query, dtype=np.float64).ravel()
        if q.shape[0] != self.dims:
            raise IntegrityError(f"query has {q.shape[0]} dims, index has {self.dims}")
        q = _unit(q)
        return (self._matrix.astype(np.float64) * q).sum(axis=1)

    def search(self, query, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise ConfigError("k must be >= 1")
        s = self.scores(query)
        order = np.lexsort((self._id_rank, -s))[:k]
        return [(self._ids[i], float(s[i])) for i in order]

    def search_batch(self, queries, k: int) -> list[list[tuple[str, float]]]:
        return [self.search(q, k) for q in np.atleast_2d(np.asarray(queries))]

    # -- snapshot ---------------------------------------------------------

    def save(self, path: str | os.PathLike) -> None:
        """Header, contiguous little-endian float32 matrix, then length-prefixed UTF-8 ids."""
        self.freeze()
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, self.dims, len(self._ids)))
            fh.write(np.ascontiguousarray(self._matrix, dtype="<f4").tobytes())
            for cid in self._ids:
                raw = cid.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "VectorIndex":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise DataError(f"{path}: truncated snapshot")
        magic, version, dims, count = _HEADER.unpack_from(raw)
        if magic != SNAPSHOT_MAGIC or version != SNAPSHOT_VERSION:
            raise DataError(f"{path}: not a vector index snapshot")
        pos = _HEADER.size
        nbytes = 4 * dims * count
        matrix = np.frombuffer(raw, dtype="<f4", count=dims * count, offset=pos).reshape(count, dims)
        pos += nbytes
        index = cls(dims)
        for row in matrix:
            (n,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            cid = raw[pos:pos + n].decode("utf-8")
            pos += n
            index._seen.add(cid)
            index._ids.append(cid)
            index._rows.append(row.astype(np.float32))
        return index.freeze()
