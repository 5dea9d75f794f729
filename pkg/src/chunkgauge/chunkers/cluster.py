from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ConfigError
from ..tokenization import Tokenizer, WhitespaceTokenizer
from .base import BaseChunker, Chunk, CountCache, check_budget, spans_to_chunks
from .kamradt import _unit_rows
from .recursive import recursive_token_chunk


def optimal_partition(similarity: np.ndarray,
                      fits: Callable[[int, int], bool] | None = None) -> tuple[list[int], float]:
    """Contiguous partition of pieces maximizing summed intra-group similarity.

    ``best[j] = max_i best[i] + reward(i, j)`` over groups ``[i, j)`` allowed
    by ``fits(i, j)``, where ``reward`` is the sum of ``similarity[a, b]``
    over pairs ``a < b`` inside the group. Singletons are always allowed.
    Candidates are scanned from the shortest group upward and only a strictly
    better value replaces the incumbent, so ties keep the shortest final group.

    Returns the group start indices and the optimal objective.
    """
    sim = np.asarray(similarity, dtype=np.float64)
    n = sim.shape[0]
    if n == 0:
        return [], 0.0
    best = [0.0] * (n + 1)
    back = [0] * (n + 1)
    for j in range(1, n + 1):
        reward = 0.0
        best_val = None
        for i in range(j - 1, -1, -1):
            if i < j - 1 and fits is not None and not fits(i, j):
                break
            # growing the group leftwards adds the pairs (i, b) for b in (i, j)
            for b in range(i + 1, j):
                reward += sim[i, b]
            val = best[i] + reward
            if best_val is None or val > best_val:
                best_val, back[j] = val, i
        best[j] = best_val
    starts = []
    j = n
    while j > 0:
        starts.append(back[j])
        j = back[j]
    return starts[::-1], best[n]


def partition_objective(similarity: np.ndarray, starts: list[int]) -> float:
    sim = np.asarray(similarity, dtype=np.float64)
    bounds = list(starts) + [sim.shape[0]]
    total = 0.0
    for i, j in zip(bounds, bounds[1:]):
        total += sum(sim[a, b] for a in range(i, j) for b in range(a + 1, j))
    return total


def cluster_semantic_chunk(doc: str, embedder, max_chunk_tokens: int = 400, piece_size: int = 50,
                           tokenizer: Tokenizer | None = None, doc_id: str = "doc") -> list[Chunk]:
    """Cut the document into ~``piece_size``-token pieces, then regroup them optimally.

    Reward is the raw sum of pairwise cosine similarities within a group;
    groups are limited to ``max_chunk_tokens``.
    """
    check_budget("max_chunk_tokens", max_chunk_tokens)
    check_budget("piece_size", piece_size)
    if piece_size > max_chunk_tokens:
        raise ConfigError("piece_size must not exceed max_chunk_tokens")
    tokenizer = tokenizer or WhitespaceTokenizer()
    pieces = recursive_token_chunk(doc, piece_size, 0, tokenizer=tokenizer)
    if len(pieces) <= 1:
        return [Chunk(doc_id, p.text, p.span, p.token_count, i) for i, p in enumerate(pieces)]
    count = CountCache(doc, tokenizer)
    bounds = [(p.span.start, p.span.end) for p in pieces]
    # whitespace-only pieces have nothing to embed; a zero row makes them neutral
    live = [i for i, p in enumerate(pieces) if p.text.strip()]
    emb = np.zeros((len(pieces), embedder.dims))
    if live:
        emb[live] = _unit_rows(embedder.embed_batch([pieces[i].text for i in live]))
    sim = emb @ emb.T

    def fits(i: int, j: int) -> bool:
        return count(bounds[i][0], bounds[j - 1][1]) <= max_chunk_tokens

    starts, _ = optimal_partition(sim, fits)
    ends = starts[1:] + [len(pieces)]
    spans = [(bounds[i][0], bounds[j - 1][1]) for i, j in zip(starts, ends)]
    return spans_to_chunks(doc, spans, tokenizer, doc_id, count)


class ClusterSemanticChunker(BaseChunker):
    """Globally optimal regrouping of small pieces by embedding similarity."""

    def __init__(self, max_chunk_tokens: int = 400, piece_size: int = 50, embedder=None,
                 tokenizer: Tokenizer | None = None):
        self.max_chunk_tokens = max_chunk_tokens
        self.piece_size = piece_size
        self.embedder = embedder
        self.tokenizer = tokenizer

    def _check_params(self):
        check_budget("max_chunk_tokens", self.max_chunk_tokens)
        check_budget("piece_size", self.piece_size)
        if self.embedder is None:
            raise ConfigError("ClusterSemanticChunker needs an embedder")

    def split(self, text, doc_id="doc"):
        self._check_params()
        return cluster_semantic_chunk(text, self.embedder, self.max_chunk_tokens, self.piece_size,
                                      self._tokenizer(), doc_id)
