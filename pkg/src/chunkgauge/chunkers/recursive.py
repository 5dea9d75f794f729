from __future__ import annotations

from typing import Sequence

from ..errors import ConfigError
from ..tokenization import Tokenizer, WhitespaceTokenizer
from .base import (
    BaseChunker,
    Chunk,
    CountCache,
    absorb_blank,
    check_budget,
    spans_to_chunks,
    token_boundaries,
    token_index_at,
)

DEFAULT_SEPARATORS = ("\n\n", "\n", ".", "?", "!", " ", "")


def _split_keep(doc: str, lo: int, hi: int, sep: str) -> list[tuple[int, int]]:
    """Split ``doc[lo:hi]`` after each ``sep``; the separator stays with the left piece."""
    if sep == "":
        return [(i, i + 1) for i in range(lo, hi)]
    pieces = []
    start = lo
    pos = doc.find(sep, lo, hi)
    while pos != -1:
        end = pos + len(sep)
        pieces.append((start, end))
        start = end
        pos = doc.find(sep, start, hi)
    if start < hi:
        pieces.append((start, hi))
    return pieces


def _pack(pieces: list[tuple[int, int]], count, budget: int) -> list[tuple[int, int]]:
    out = []
    cur_s, cur_e = pieces[0]
    for s, e in pieces[1:]:
        if count(cur_s, e) <= budget:
            cur_e = e
        else:
            out.append((cur_s, cur_e))
            cur_s, cur_e = s, e
    out.append((cur_s, cur_e))
    return out


def _recurse(doc: str, lo: int, hi: int, separators: Sequence[str], count,
             budget: int) -> list[tuple[int, int]]:
    for i, sep in enumerate(separators):
        if sep == "" or doc.find(sep, lo, hi) != -1:
            rest = separators[i + 1:]
            break
    else:
        return [(lo, hi)]
    out: list[tuple[int, int]] = []
    fitting: list[tuple[int, int]] = []
    for s, e in _split_keep(doc, lo, hi, sep):
        if count(s, e) <= budget:
            fitting.append((s, e))
            continue
        if fitting:
            out.extend(_pack(fitting, count, budget))
            fitting = []
        if rest:
            out.extend(_recurse(doc, s, e, rest, count, budget))
        else:
            out.append((s, e))  # a single character over budget; nothing finer exists
    if fitting:
        out.extend(_pack(fitting, count, budget))
    return out


def recursive_token_chunk(doc: str, chunk_size: int, overlap: int = 0,
                          separators: Sequence[str] = DEFAULT_SEPARATORS,
                          tokenizer: Tokenizer | None = None, doc_id: str = "doc") -> list[Chunk]:
    """Split on the highest-priority separator, pack greedily, recurse on oversize pieces.

    Separators are kept at the end of the piece they terminate, so with
    ``overlap == 0`` the chunk texts concatenate to ``doc`` exactly. With
    overlap, pieces are packed to ``chunk_size - overlap`` tokens and each
    chunk after the first is then extended backwards by up to ``overlap``
    tokens of its predecessor, never beyond ``chunk_size``.
    """
    check_budget("chunk_size", chunk_size)
    if not 0 <= overlap < chunk_size:
        raise ConfigError(f"overlap must satisfy 0 <= overlap < chunk_size, got {overlap}")
    separators = tuple(separators)
    if not separators or separators[-1] != "":
        raise ConfigError("separator list must end with the empty (character-level) separator")
    tokenizer = tokenizer or WhitespaceTokenizer()
    if not doc:
        return []
    count = CountCache(doc, tokenizer)
    budget = chunk_size - overlap
    spans = _recurse(doc, 0, len(doc), separators, count, budget)
    spans = absorb_blank(doc, spans, count, budget)
    if overlap and len(spans) > 1:
        spans = _extend_overlap(doc, spans, tokenizer, count, chunk_size, overlap)
    return spans_to_chunks(doc, spans, tokenizer, doc_id, count)


def _extend_overlap(doc, spans, tokenizer, count, chunk_size, overlap):
    seq = tokenizer.encode(doc)
    cuts = token_boundaries(seq, len(doc))
    ends = seq.ends
    out = [spans[0]]
    for (s, e), (prev_s, _) in zip(spans[1:], spans):
        first = token_index_at(ends, s)
        t = max(first - overlap, 0)
        new_s = max(cuts[t], prev_s)
        while new_s < s and count(new_s, e) > chunk_size:
            t += 1
            new_s = max(cuts[t], prev_s) if t < first else s
        out.append((min(new_s, s), e))
    return out


class RecursiveTokenChunker(BaseChunker):
    """Hierarchical separator splitting under a token budget."""

    def __init__(self, chunk_size: int = 100, overlap: int = 0,
                 separators: Sequence[str] = DEFAULT_SEPARATORS, tokenizer: Tokenizer | None = None):
        self.chunk_size = chunk_size
        self.overlap = overlap
        self.separators = separators
        self.tokenizer = tokenizer

    def _check_params(self):
        check_budget("chunk_size", self.chunk_size)
        if not 0 <= self.overlap < self.chunk_size:
            raise ConfigError("overlap must satisfy 0 <= overlap < chunk_size")

    def split(self, text, doc_id="doc"):
        return recursive_token_chunk(text, self.chunk_size, self.overlap, self.separators,
                                     self._tokenizer(), doc_id)
