from __future__ import annotations

from ..tokenization import Tokenizer, WhitespaceTokenizer
from .base import BaseChunker, Chunk, CountCache, check_budget, spans_to_chunks, token_boundaries
from ..errors import ConfigError


def fixed_token_chunk(doc: str, chunk_size: int, overlap: int = 0,
                      tokenizer: Tokenizer | None = None, doc_id: str = "doc") -> list[Chunk]:
    """Slide a window of ``chunk_size`` tokens with stride ``chunk_size - overlap``.

    A window starts at every stride multiple below the token count, so the
    tail may yield a short window that lies inside its predecessor
    (250 tokens, size 100, overlap 20 gives windows at 0, 80, 160, 240).
    """
    check_budget("chunk_size", chunk_size)
    if not 0 <= overlap < chunk_size:
        raise ConfigError(f"overlap must satisfy 0 <= overlap < chunk_size, got {overlap}")
    tokenizer = tokenizer or WhitespaceTokenizer()
    seq = tokenizer.encode(doc)
    n = len(seq)
    if n == 0:
        return []
    cuts = token_boundaries(seq, len(doc))
    count = CountCache(doc, tokenizer)
    spans = []
    for start in range(0, n, chunk_size - overlap):
        end = min(start + chunk_size, n)
        # BPE may tokenize a slice differently from the full text; shrink until it fits
        while end - start > 1 and count(cuts[start], cuts[end]) > chunk_size:
            end -= 1
        spans.append((cuts[start], cuts[end]))
    return spans_to_chunks(doc, spans, tokenizer, doc_id, count)


class FixedTokenChunker(BaseChunker):
    """Fixed-size token windows, optionally overlapping."""

    def __init__(self, chunk_size: int = 100, overlap: int = 0, tokenizer: Tokenizer | None = None):
        self.chunk_size = chunk_size
        self.overlap = overlap
        self.tokenizer = tokenizer

    def _check_params(self):
        check_budget("chunk_size", self.chunk_size)
        if not 0 <= self.overlap < self.chunk_size:
            raise ConfigError("overlap must satisfy 0 <= overlap < chunk_size")

    def split(self, text, doc_id="doc"):
        return fixed_token_chunk(text, self.chunk_size, self.overlap, self._tokenizer(), doc_id)
