from __future__ import annotations

import re
import warnings
from importlib import resources

from ..errors import ChunkingWarning, ConfigError
from ..tokenization import Tokenizer, WhitespaceTokenizer
from .base import BaseChunker, Chunk, CountCache, check_budget, spans_to_chunks
from .fixed import fixed_token_chunk
from .recursive import recursive_token_chunk

PROMPT_VERSION = "v1"
RETRY_MESSAGE = ("Your reply could not be parsed. Reply with one line: "
                 "'split after spans: N1, N2, ...' or 'split after spans: none'.")

_REPLY = re.compile(r"split\s+after\s+spans?\s*:?\s*(.*)", re.IGNORECASE)
_NUMBERS = re.compile(r"\d+(?:\s*(?:,|and)\s*\d+)*")


def load_prompt(version: str = PROMPT_VERSION) -> str:
    return resources.files("chunkgauge.assets").joinpath(f"llm_chunker_prompt_{version}.txt").read_text("utf-8")


def parse_split_reply(reply: str, first: int, last: int) -> list[int] | None:
    """Span numbers after which to split, or ``None`` when the reply is malformed.

    Accepted: ``split after spans: 2, 4`` (colon optional, ``and`` allowed)
    and ``split after spans: none``. Numbers must be strictly increasing and
    within ``[first, last]``.
    """
    if not isinstance(reply, str):
        return None
    m = _REPLY.search(reply)
    if m is None:
        return None
    tail = m.group(1).strip().splitlines()[0].strip() if m.group(1).strip() else ""
    tail = tail.rstrip(".").strip()
    if tail == "" or tail.lower() == "none":
        return []
    if not _NUMBERS.fullmatch(tail):
        return None
    picks = [int(x) for x in re.findall(r"\d+", tail)]
    if any(b <= a for a, b in zip(picks, picks[1:])) or picks[0] < first or picks[-1] > last:
        return None
    return picks


def _marked(spans: list[str], first: int) -> str:
    return "".join(f"<|start_chunk_{first + i}|>{text}<|end_chunk_{first + i}|>"
                   for i, text in enumerate(spans))


def llm_semantic_chunk(doc: str, llm_client, span_size: int = 50, tokenizer: Tokenizer | None = None,
                       doc_id: str = "doc", window_spans: int = 16,
                       prompt: str | None = None) -> list[Chunk]:
    """Let a language model choose chunk boundaries among marked ~``span_size``-token spans.

    Spans are sent in windows of ``window_spans``. A malformed reply gets one
    re-prompt; a second failure abandons the model for this document and
    falls back to fixed windows of ``4 * span_size`` tokens, with a
    :class:`ChunkingWarning`.
    """
    check_budget("span_size", span_size)
    tokenizer = tokenizer or WhitespaceTokenizer()
    pieces = recursive_token_chunk(doc, span_size, 0, tokenizer=tokenizer)
    if len(pieces) <= 1:
        return [Chunk(doc_id, p.text, p.span, p.token_count, i) for i, p in enumerate(pieces)]
    prompt = prompt if prompt is not None else load_prompt()
    cuts: list[int] = []  # 1-based span numbers to split after
    for lo in range(0, len(pieces), window_spans):
        window = [p.text for p in pieces[lo:lo + window_spans]]
        first, last = lo + 1, lo + len(window)
        messages = [{"role": "system", "content": prompt},
                    {"role": "user", "content": _marked(window, first)}]
        reply = llm_client.complete(messages)
        picks = parse_split_reply(reply, first, last)
        if picks is None:
            messages += [{"role": "assistant", "content": str(reply)},
                         {"role": "user", "content": RETRY_MESSAGE}]
            picks = parse_split_reply(llm_client.complete(messages), first, last)
        if picks is None:
            warnings.warn(ChunkingWarning(
                f"{doc_id}: unparseable LLM reply after retry; fell back to fixed {4 * span_size}-token chunks"))
            return fixed_token_chunk(doc, 4 * span_size, 0, tokenizer, doc_id)
        cuts.extend(p for p in picks if p < len(pieces))
    starts = [0] + cuts
    ends = cuts + [len(pieces)]
    spans = [(pieces[i].span.start, pieces[j - 1].span.end) for i, j in zip(starts, ends)]
    return spans_to_chunks(doc, spans, tokenizer, doc_id, CountCache(doc, tokenizer))


class LLMSemanticChunker(BaseChunker):
    """Boundaries proposed by a chat model over marker-delimited spans."""

    def __init__(self, llm_client=None, span_size: int = 50, tokenizer: Tokenizer | None = None,
                 window_spans: int = 16):
        self.llm_client = llm_client
        self.span_size = span_size
        self.tokenizer = tokenizer
        self.window_spans = window_spans

    def _check_params(self):
        check_budget("span_size", self.span_size)
        check_budget("window_spans", self.window_spans)
        if self.llm_client is None:
            raise ConfigError("LLMSemanticChunker needs an llm_client")

    def split(self, text, doc_id="doc"):
        self._check_params()
        return llm_semantic_chunk(text, self.llm_client, self.span_size, self._tokenizer(), doc_id,
                                  self.window_spans)
