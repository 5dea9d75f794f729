"""Offline stand-ins for the chat-completion client used by the LLM chunker."""

from __future__ import annotations

import re
from typing import Iterable, Protocol

_MARKER = re.compile(r"<\|start_chunk_(\d+)\|>")


class LLMClient(Protocol):
    def complete(self, messages: list[dict]) -> str: ...


class ScriptedLLMClient:
    """Replays canned replies in order and records every prompt it receives."""

    identifier = "scripted"

    def __init__(self, replies: Iterable[str]):
        self.replies = list(replies)
        self.prompts: list[list[dict]] = []

    def complete(self, messages):
        self.prompts.append(list(messages))
        if not self.replies:
            return ""
        return self.replies.pop(0) if len(self.replies) > 1 else self.replies[0]


class StrideLLMClient:
    """Deterministic reply that splits after every ``stride``-th marked span."""

    def __init__(self, stride: int = 4):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = stride

    @property
    def identifier(self) -> str:
        return f"stride/{self.stride}"

    def complete(self, messages):
        ids = [int(m) for m in _MARKER.findall(messages[-1]["content"])]
        if not ids:
            return "split after spans: none"
        first = min(ids)
        picks = [i for i in ids if (i - first + 1) % self.stride == 0]
        return "split after spans: " + (", ".join(map(str, picks)) if picks else "none")
