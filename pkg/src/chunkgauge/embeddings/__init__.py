from .base import (
    DeterministicEmbedder,
    Embedder,
    ProviderConfig,
    deterministic_embed,
    normalize_rows,
)
from .cache import CachedEmbedder, EmbeddingCache
from .llm import LLMClient, ScriptedLLMClient, StrideLLMClient
from .remote import API_KEY_ENV, RemoteEmbedder, RemoteLLMClient


def build_embedder(config: ProviderConfig, tokenizer=None, cache_dir=None, max_concurrency: int = 4,
                   transport=None) -> Embedder:
    """Instantiate the provider described by ``config``, optionally behind the disk cache."""
    if config.kind == "remote":
        embedder: Embedder = RemoteEmbedder(
            config.endpoint, config.model_name, dims=config.dims, max_batch=config.max_batch,
            max_retries=config.max_retries, timeout=config.timeout,
            max_input_tokens=config.max_input_tokens, tokenizer=tokenizer,
            max_concurrency=max_concurrency, transport=transport)
    else:
        embedder = DeterministicEmbedder(config.dims, config.model_name, config.max_batch,
                                         tokenizer, config.max_input_tokens)
    if cache_dir is not None:
        embedder = CachedEmbedder(embedder, EmbeddingCache(cache_dir))
    return embedder


__all__ = [
    "API_KEY_ENV",
    "CachedEmbedder",
    "DeterministicEmbedder",
    "Embedder",
    "EmbeddingCache",
    "LLMClient",
    "ProviderConfig",
    "RemoteEmbedder",
    "RemoteLLMClient",
    "ScriptedLLMClient",
    "StrideLLMClient",
    "build_embedder",
    "deterministic_embed",
    "normalize_rows",
]
