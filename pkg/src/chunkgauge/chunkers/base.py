"""Chunk and config types, the short-name grammar, and the chunker base class."""

from __future__ import annotations

import bisect
import enum
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import ConfigError
from ..tokenization import CharSpan, TokenSequence, Tokenizer, WhitespaceTokenizer


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    text: str
    span: CharSpan
    token_count: int
    index: int = 0

    @property
    def chunk_id(self) -> str:
        # zero padding keeps lexicographic order equal to document order
        return f"{self.doc_id}#{self.index:06d}"

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_id": self.chunk_id,
            "start": self.span.start,
            "end": self.span.end,
            "token_count": self.token_count,
            "text": self.text,
        }


class Strategy(str, enum.Enum):
    FIXED = "FX"
    RECURSIVE = "RT"
    KAMRADT_MODIFIED = "K"
    CLUSTER_SEMANTIC = "CL"
    LLM_SEMANTIC = "LLM"


_SHORT_NAME = re.compile(r"(?:(RT|FX)([1-9]\d*)-(0|[1-9]\d*)|K([1-9]\d*)|(CL)|(LLM))")


@dataclass(frozen=True)
class ChunkerConfig:
    strategy: Strategy
    chunk_size: int | None = None
    overlap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        sized = self.strategy in (Strategy.FIXED, Strategy.RECURSIVE, Strategy.KAMRADT_MODIFIED)
        if sized:
            if self.chunk_size is None or self.chunk_size <= 0:
                raise ConfigError(f"{self.strategy.name} needs a positive chunk_size")
        elif self.chunk_size is not None:
            raise ConfigError(f"{self.strategy.name} takes no chunk_size")
        if self.strategy in (Strategy.FIXED, Strategy.RECURSIVE):
            overlap = 0 if self.overlap is None else self.overlap
            if not 0 <= overlap < self.chunk_size:
                raise ConfigError(f"overlap must satisfy 0 <= overlap < chunk_size, got {overlap}")
            object.__setattr__(self, "overlap", overlap)
        elif self.overlap is not None:
            raise ConfigError(f"{self.strategy.name} takes no overlap")

    @property
    def short_name(self) -> str:
        return format_short_name(self)

    def __str__(self) -> str:
        return self.short_name


def parse_short_name(name: str) -> ChunkerConfig:
    """``RT100-0`` / ``FX64-12`` / ``K200`` / ``CL`` / ``LLM`` to a config.

    Overlap suffixes are token counts, not percentages.
    """
    m = _SHORT_NAME.fullmatch(name.strip()) if isinstance(name, str) else None
    if m is None:
        raise ConfigError(f"malformed chunker short name {name!r}")
    family, size, overlap, k_size, cl, llm = m.groups()
    if family:
        return ChunkerConfig(Strategy(family), int(size), int(overlap))
    if k_size:
        return ChunkerConfig(Strategy.KAMRADT_MODIFIED, int(k_size))
    if cl:
        return ChunkerConfig(Strategy.CLUSTER_SEMANTIC)
    return ChunkerConfig(Strategy.LLM_SEMANTIC)


def format_short_name(config: ChunkerConfig) -> str:
    s = config.strategy
    if s in (Strategy.FIXED, Strategy.RECURSIVE):
        return f"{s.value}{config.chunk_size}-{config.overlap}"
    if s is Strategy.KAMRADT_MODIFIED:
        return f"K{config.chunk_size}"
    return s.value


# -- span helpers shared by the strategies ---------------------------------

def token_boundaries(seq: TokenSequence, n_chars: int) -> list[int]:
    """Cut positions between tokens: ``[0, start_1, ..., start_{n-1}, n_chars]``.

    Cutting only at these positions keeps inter-token whitespace inside a
    chunk, so non-overlapping chunks concatenate back to the document.
    """
    if not seq.offsets:
        return [0, n_chars]
    return [0] + [o.start for o in seq.offsets[1:]] + [n_chars]


def token_index_at(token_ends: Sequence[int], pos: int) -> int:
    """Index of the first token whose span ends after ``pos``."""
    return bisect.bisect_right(token_ends, pos)


class CountCache:
    """Memoized token counts of document slices."""

    def __init__(self, doc: str, tokenizer: Tokenizer):
        self.doc = doc
        self.tokenizer = tokenizer
        self._cache: dict[tuple[int, int], int] = {}

    def __call__(self, start: int, end: int) -> int:
        key = (start, end)
        n = self._cache.get(key)
        if n is None:
            n = self._cache[key] = self.tokenizer.count_tokens(self.doc[start:end])
        return n


def absorb_blank(doc: str, spans: list[tuple[int, int]], count: Callable[[int, int], int],
                 cap: int | None) -> list[tuple[int, int]]:
    """Fold whitespace-only spans into a neighbour when the cap allows it."""
    out: list[tuple[int, int]] = []
    pending: tuple[int, int] | None = None
    for s, e in spans:
        if pending is not None:
            s = pending[0]
            pending = None
        if doc[s:e].strip():
            out.append((s, e))
            continue
        if out and (cap is None or count(out[-1][0], e) <= cap):
            out[-1] = (out[-1][0], e)
        else:
            pending = (s, e)
    if pending is not None:
        if out and (cap is None or count(out[-1][0], pending[1]) <= cap):
            out[-1] = (out[-1][0], pending[1])
        elif count(*pending) > 0:
            out.append(pending)
    return out


def spans_to_chunks(doc: str, spans: Iterable[tuple[int, int]], tokenizer: Tokenizer,
                    doc_id: str, count: Callable[[int, int], int] | None = None) -> list[Chunk]:
    count = count or CountCache(doc, tokenizer)
    chunks = []
    for s, e in spans:
        n = count(s, e)
        if n == 0:
            continue
        chunks.append(Chunk(doc_id, doc[s:e], CharSpan(s, e), n, len(chunks)))
    return chunks


class BaseChunker(BaseEstimator, TransformerMixin):
    """Stateless chunker with the scikit-learn transformer interface.

    ``fit`` only validates parameters; ``transform`` maps a sequence of
    documents (strings, ``(doc_id, text)`` pairs, or a ``{doc_id: text}``
    mapping) to one list of :class:`Chunk` per document.
    """

    def fit(self, X=None, y=None):
        self._check_params()
        return self

    def transform(self, X) -> list[list[Chunk]]:
        self._check_params()
        return [self.split(text, doc_id) for doc_id, text in _iter_docs(X)]

    def split(self, text: str, doc_id: str = "doc") -> list[Chunk]:
        raise NotImplementedError

    def _check_params(self) -> None:
        pass

    def _tokenizer(self) -> Tokenizer:
        return self.tokenizer if self.tokenizer is not None else WhitespaceTokenizer()


def _iter_docs(X) -> Iterable[tuple[str, str]]:
    if isinstance(X, str):
        raise ConfigError("transform expects a collection of documents, not a single string")
    if isinstance(X, Mapping):
        yield from X.items()
        return
    for i, item in enumerate(X):
        if isinstance(item, str):
            yield f"doc{i}", item
        else:
            doc_id, text = item
            yield doc_id, text


def check_budget(name: str, value: int, minimum: int = 1) -> None:
    if not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


def as_span_list(chunks: Sequence[Chunk]) -> list[tuple[int, int]]:
    return [(c.span.start, c.span.end) for c in chunks]
