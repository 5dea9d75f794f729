"""Token-level view of text: encode/decode, counting and character offsets.

Character offsets are Unicode code-point positions, never byte positions.
"""

from __future__ import annotations

import base64
import os
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DecodeError

CL100K_PATTERN = (
    r"""'(?i:[sdmt]|ll|ve|re)|[^\r\n\p{L}\p{N}]?+\p{L}++|\p{N}{1,3}+| ?[^\s\p{L}\p{N}]++[\r\n]*+"""
    r"""|\s++$|\s*[\r\n]|\s+(?!\S)|\s"""
)

VOCAB_ENV = "CHUNKGAUGE_VOCAB"


@dataclass(frozen=True, order=True)
class CharSpan:
    """Half-open character interval ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def intersects(self, other: "CharSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class TokenSequence:
    """Token ids with one character span per token.

    Offsets are sorted and disjoint. Subword tokens that cut a multi-byte
    character get a zero-width span; the token that completes the
    character owns it.
    """

    ids: tuple
    offsets: tuple[CharSpan, ...]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def starts(self) -> list[int]:
        return [o.start for o in self.offsets]

    @property
    def ends(self) -> list[int]:
        return [o.end for o in self.offsets]


class Tokenizer(ABC):
    """Immutable after construction, so instances may be shared across threads."""

    name: str = "tokenizer"

    @abstractmethod
    def encode(self, text: str) -> TokenSequence: ...

    @abstractmethod
    def decode(self, ids: Sequence) -> str: ...

    def count_tokens(self, text: str) -> int:
        return len(self.encode(text).ids)

    def truncate(self, text: str, max_tokens: int) -> str:
        """Longest prefix of ``text`` holding at most ``max_tokens`` tokens."""
        seq = self.encode(text)
        if len(seq) <= max_tokens:
            return text
        if max_tokens <= 0:
            return ""
        return text[: seq.offsets[max_tokens - 1].end]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"


_WORD = re.compile(r"\S+")


class WhitespaceTokenizer(Tokenizer):
    """One token per run of non-whitespace characters.

    Offsets cover only the word itself; the surrounding whitespace is folded
    into the token id so that ``decode(encode(t).ids) == t`` for any text
    containing at least one non-space character.
    """

    name = "whitespace"

    def encode(self, text: str) -> TokenSequence:
        matches = list(_WORD.finditer(text))
        ids = []
        offsets = []
        for i, m in enumerate(matches):
            lo = 0 if i == 0 else m.start()
            hi = matches[i + 1].start() if i + 1 < len(matches) else len(text)
            ids.append(_pack(text[lo:hi]))
            offsets.append(CharSpan(m.start(), m.end()))
        return TokenSequence(tuple(ids), tuple(offsets))

    def decode(self, ids: Sequence) -> str:
        return "".join(_unpack(i) for i in ids)

    def count_tokens(self, text: str) -> int:
        return sum(1 for _ in _WORD.finditer(text))


def _pack(piece: str) -> int:
    return int.from_bytes(piece.encode("utf-8") + b"\x01", "little")


def _unpack(token_id) -> str:
    if not isinstance(token_id, (int, np.integer)) or token_id <= 0:
        raise DecodeError(f"unknown token id {token_id!r}")
    token_id = int(token_id)
    raw = token_id.to_bytes((token_id.bit_length() + 7) // 8, "little")
    if not raw.endswith(b"\x01"):
        raise DecodeError(f"unknown token id {token_id!r}")
    try:
        return raw[:-1].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"unknown token id {token_id!r}") from exc


def load_bpe_ranks(path: str | os.PathLike) -> dict[bytes, int]:
    """Parse a ``<base64 token> <rank>`` vocabulary file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"tokenizer vocabulary not found: {path}")
    ranks: dict[bytes, int] = {}
    with path.open("rb") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                token, rank = line.split()
                ranks[base64.b64decode(token, validate=True)] = int(rank)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: corrupt vocabulary line") from exc
    if not ranks:
        raise ConfigError(f"tokenizer vocabulary is empty: {path}")
    return ranks


class BPETokenizer(Tokenizer):
    """Byte-level BPE backed by ``tiktoken``, loaded from a local rank file.

    Special tokens are never produced: text such as ``<|endoftext|>`` is
    tokenized like any other string.
    """

    def __init__(self, vocab_path: str | os.PathLike, name: str = "cl100k_base",
                 pattern: str = CL100K_PATTERN):
        import tiktoken

        self.name = name
        self.vocab_path = str(vocab_path)
        ranks = load_bpe_ranks(vocab_path)
        try:
            self._enc = tiktoken.Encoding(name=name, pat_str=pattern,
                                          mergeable_ranks=ranks, special_tokens={})
        except Exception as exc:  # tiktoken raises plain ValueError/pyo3 errors
            raise ConfigError(f"cannot build tokenizer from {vocab_path}: {exc}") from exc

    def encode(self, text: str) -> TokenSequence:
        ids = self._enc.encode_ordinary(text)
        if not ids:
            return TokenSequence((), ())
        token_bytes = self._enc.decode_tokens_bytes(ids)
        byte_ends = np.cumsum([len(b) for b in token_bytes])
        byte_starts = np.concatenate(([0], byte_ends[:-1]))
        char_starts, total = _char_byte_starts(text)
        starts = _byte_to_char(byte_starts, char_starts, total, len(text))
        ends = _byte_to_char(byte_ends, char_starts, total, len(text))
        offsets = tuple(CharSpan(int(s), int(e)) for s, e in zip(starts, ends))
        return TokenSequence(tuple(ids), offsets)

    def decode(self, ids: Sequence) -> str:
        try:
            raw = b"".join(self._enc.decode_single_token_bytes(int(i)) for i in ids)
        except (KeyError, ValueError, OverflowError, TypeError) as exc:
            raise DecodeError(f"unknown token id in {list(ids)[:8]}...") from exc
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("token ids do not form valid UTF-8 text") from exc

    def count_tokens(self, text: str) -> int:
        return len(self._enc.encode_ordinary(text))


def _char_byte_starts(text: str) -> tuple[np.ndarray, int]:
    cps = np.frombuffer(text.encode("utf-32-le"), dtype="<u4")
    widths = 1 + (cps >= 0x80) + (cps >= 0x800) + (cps >= 0x10000)
    ends = np.cumsum(widths, dtype=np.int64)
    return ends - widths, int(ends[-1]) if len(ends) else 0


def _byte_to_char(byte_pos: np.ndarray, char_starts: np.ndarray, total: int,
                  n_chars: int) -> np.ndarray:
    # index of the character containing each byte; one past the end maps to n_chars
    idx = np.searchsorted(char_starts, byte_pos, side="right") - 1
    return np.where(byte_pos >= total, n_chars, idx)


def load_tokenizer(kind: str = "bpe", vocab_path: str | os.PathLike | None = None) -> Tokenizer:
    """Build a tokenizer from config values.

    For ``kind="bpe"`` the vocabulary path falls back to ``$CHUNKGAUGE_VOCAB``.
    """
    kind = kind.lower()
    if kind == "whitespace":
        return WhitespaceTokenizer()
    if kind in ("bpe", "cl100k", "cl100k_base"):
        vocab_path = vocab_path or os.environ.get(VOCAB_ENV)
        if not vocab_path:
            raise ConfigError("tokenizer.vocab_path is required for the BPE tokenizer")
        return BPETokenizer(vocab_path)
    raise ConfigError(f"unknown tokenizer kind {kind!r}")
