from __future__ import annotations

import re
import warnings

import numpy as np

from ..errors import ChunkingWarning, ConfigError
from ..tokenization import Tokenizer, WhitespaceTokenizer
from .base import BaseChunker, Chunk, CountCache, absorb_blank, check_budget, spans_to_chunks
from .recursive import recursive_token_chunk

_SENTENCE_END = re.compile(r"[.?!]\s+|\n+")


def split_sentences(doc: str) -> list[tuple[int, int]]:
    """Sentence spans covering ``doc``: cut after ``[.?!]`` + whitespace, and after newlines."""
    spans = []
    start = 0
    for m in _SENTENCE_END.finditer(doc):
        if m.end() > start:
            spans.append((start, m.end()))
            start = m.end()
    if start < len(doc):
        spans.append((start, len(doc)))
    return spans


def _unit_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms == 0, 1.0, norms)


def window_distances(embeddings: np.ndarray) -> np.ndarray:
    """Cosine distance between each pair of consecutive window embeddings."""
    e = _unit_rows(embeddings)
    return 1.0 - np.einsum("ij,ij->i", e[:-1], e[1:])


def kamradt_modified_chunk(doc: str, embedder, max_tokens: int, tokenizer: Tokenizer | None = None,
                           doc_id: str = "doc", buffer: int = 1, max_iter: int = 50) -> list[Chunk]:
    """Semantic breakpoints at similarity drops, thresholded to respect a token cap.

    Each sentence is embedded together with ``buffer`` neighbours on each
    side. A boundary is placed after sentence ``i`` when the distance to the
    next window exceeds the percentile threshold. The percentile is binary
    searched over ``[0, 100]`` for the largest value whose chunks all fit in
    ``max_tokens``; if none fits, every sentence boundary is used.
    Sentences longer than the cap are pre-split with the recursive chunker.
    """
    check_budget("max_tokens", max_tokens)
    tokenizer = tokenizer or WhitespaceTokenizer()
    count = CountCache(doc, tokenizer)
    units = absorb_blank(doc, split_sentences(doc), count, None)
    if not units:
        return []
    units = _cap_units(doc, units, count, max_tokens, tokenizer, doc_id)
    if len(units) == 1:
        return spans_to_chunks(doc, units, tokenizer, doc_id, count)

    distances = _distances(doc, units, embedder, buffer)

    def fits(threshold: float) -> bool:
        return all(count(s, e) <= max_tokens for s, e in _cut(units, distances, threshold))

    if fits(np.percentile(distances, 100)):
        threshold = float(np.percentile(distances, 100))
    elif not fits(np.percentile(distances, 0)):
        threshold = -np.inf
    else:
        lo, hi = 0.0, 100.0
        for _ in range(max_iter):
            mid = (lo + hi) / 2
            if fits(np.percentile(distances, mid)):
                lo = mid
            else:
                hi = mid
        threshold = float(np.percentile(distances, lo))
    return spans_to_chunks(doc, _cut(units, distances, threshold), tokenizer, doc_id, count)


def kamradt_semantic_chunk(doc: str, embedder, tokenizer: Tokenizer | None = None,
                           doc_id: str = "doc", buffer: int = 1, percentile: float = 95.0) -> list[Chunk]:
    """Uncapped base variant: one fixed percentile threshold, no size control."""
    tokenizer = tokenizer or WhitespaceTokenizer()
    count = CountCache(doc, tokenizer)
    units = absorb_blank(doc, split_sentences(doc), count, None)
    if len(units) <= 1:
        return spans_to_chunks(doc, units, tokenizer, doc_id, count)
    distances = _distances(doc, units, embedder, buffer)
    spans = _cut(units, distances, float(np.percentile(distances, percentile)))
    return spans_to_chunks(doc, spans, tokenizer, doc_id, count)


def _distances(doc, units, embedder, buffer):
    n = len(units)
    windows = [doc[units[max(i - buffer, 0)][0]:units[min(i + buffer, n - 1)][1]] for i in range(n)]
    return window_distances(embedder.embed_batch(windows))


def _cut(units, distances, threshold):
    spans, start = [], 0
    for i, d in enumerate(distances):
        if d > threshold:
            spans.append((units[start][0], units[i][1]))
            start = i + 1
    spans.append((units[start][0], units[-1][1]))
    return spans


def _cap_units(doc, units, count, max_tokens, tokenizer, doc_id):
    out = []
    for s, e in units:
        if count(s, e) <= max_tokens:
            out.append((s, e))
            continue
        warnings.warn(ChunkingWarning(
            f"{doc_id}: sentence at [{s}, {e}) exceeds {max_tokens} tokens; split recursively"))
        pieces = recursive_token_chunk(doc[s:e], max_tokens, 0, tokenizer=tokenizer)
        out.extend((s + p.span.start, s + p.span.end) for p in pieces)
    return out


class KamradtModifiedChunker(BaseChunker):
    """Embedding-driven sentence grouping with a hard token cap."""

    def __init__(self, max_tokens: int = 200, embedder=None, tokenizer: Tokenizer | None = None,
                 buffer: int = 1, max_iter: int = 50):
        self.max_tokens = max_tokens
        self.embedder = embedder
        self.tokenizer = tokenizer
        self.buffer = buffer
        self.max_iter = max_iter

    def _check_params(self):
        check_budget("max_tokens", self.max_tokens)
        if self.embedder is None:
            raise ConfigError("KamradtModifiedChunker needs an embedder")

    def split(self, text, doc_id="doc"):
        self._check_params()
        return kamradt_modified_chunk(text, self.embedder, self.max_tokens, self._tokenizer(),
                                      doc_id, self.buffer, self.max_iter)
