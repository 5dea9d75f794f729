"""HTTP providers: OpenAI-style ``/embeddings`` and ``/chat/completions``."""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from typing import Callable

import httpx
import numpy as np

from ..errors import ProviderError
from ..tokenization import Tokenizer
from .base import Embedder

log = logging.getLogger(__name__)

API_KEY_ENV = "EMBED_API_KEY"
_RETRYABLE = {408, 409, 425, 429, 500, 502, 503, 504}


class _HttpService:
    """POST with bounded concurrency and jittered exponential backoff."""

    def __init__(self, endpoint: str, timeout: float, max_retries: int, max_concurrency: int,
                 transport: httpx.BaseTransport | None, sleep: Callable[[float], None],
                 backoff: float, seed: int | None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.transport = transport
        self._sleep = sleep
        self._backoff = backoff
        self._gate = threading.BoundedSemaphore(max_concurrency)
        self._jitter = random.Random(seed)

    def post(self, path: str, payload: dict) -> dict:
        headers = {}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = f"{self.endpoint}/{path}"
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self._backoff * 2 ** (attempt - 1) * self._jitter.uniform(0.75, 1.25)
                log.warning("retrying %s in %.2fs after: %s", url, delay, last)
                self._sleep(delay)
            try:
                with self._gate, httpx.Client(transport=self.transport, timeout=self.timeout) as client:
                    resp = client.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last = exc
                continue
            if resp.status_code in _RETRYABLE:
                last = ProviderError(f"{url} returned HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProviderError(f"{url} returned a non-JSON body") from exc
        raise ProviderError(f"{url} failed after {self.max_retries + 1} attempts: {last}")


class RemoteEmbedder(Embedder):
    """Client for ``POST {endpoint}/embeddings``.

    Request body ``{"model": name, "input": [...]}``; the response's
    ``data[*].embedding`` rows are reordered by their ``index`` field.
    """

    provider = "remote"

    def __init__(self, endpoint: str, model_name: str, dims: int = 3072, max_batch: int = 64,
                 max_retries: int = 3, timeout: float = 30.0, max_input_tokens: int | None = 8191,
                 tokenizer: Tokenizer | None = None, max_concurrency: int = 4,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, backoff: float = 1.0,
                 seed: int | None = None):
        self.endpoint = endpoint
        self.model_name = model_name
        self.dims = dims
        self.max_batch = max_batch
        self.max_input_tokens = max_input_tokens
        self.tokenizer = tokenizer
        self._http = _HttpService(endpoint, timeout, max_retries, max_concurrency, transport,
                                  sleep, backoff, seed)

    def _embed(self, texts):
        body = self._http.post("embeddings", {"model": self.model_name, "input": texts})
        try:
            rows = sorted(body["data"], key=lambda r: r["index"])
            vectors = [r["embedding"] for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderError("malformed embeddings response") from exc
        if [r["index"] for r in rows] != list(range(len(texts))):
            raise ProviderError("embeddings response indices do not match the request")
        return np.asarray(vectors, dtype=np.float64)


class RemoteLLMClient:
    """Client for ``POST {endpoint}/chat/completions``; returns the first choice's text."""

    def __init__(self, endpoint: str, model_name: str, max_retries: int = 3, timeout: float = 120.0,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, backoff: float = 1.0):
        self.endpoint = endpoint
        self.model_name = model_name
        self._http = _HttpService(endpoint, timeout, max_retries, 1, transport, sleep, backoff, None)

    @property
    def identifier(self) -> str:
        return f"remote/{self.model_name}"

    def complete(self, messages: list[dict]) -> str:
        body = self._http.post("chat/completions", {"model": self.model_name, "messages": messages})
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError("malformed chat completion response") from exc
