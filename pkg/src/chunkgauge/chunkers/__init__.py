"""Chunking strategies and their configuration grammar."""

from ..errors import ConfigError
from .base import (
    BaseChunker,
    Chunk,
    ChunkerConfig,
    Strategy,
    format_short_name,
    parse_short_name,
)
from .cluster import ClusterSemanticChunker, cluster_semantic_chunk, optimal_partition
from .fixed import FixedTokenChunker, fixed_token_chunk
from .grid import GridSpec, default_grid_spec, grid_configs
from .kamradt import KamradtModifiedChunker, kamradt_modified_chunk, kamradt_semantic_chunk
from .llm import LLMSemanticChunker, llm_semantic_chunk, parse_split_reply
from .recursive import DEFAULT_SEPARATORS, RecursiveTokenChunker, recursive_token_chunk


def make_chunker(config: ChunkerConfig | str, tokenizer=None, embedder=None, llm_client=None,
                 cluster_max_tokens: int = 400, piece_size: int = 50) -> BaseChunker:
    """Chunker estimator for a config or short name."""
    if isinstance(config, str):
        config = parse_short_name(config)
    s = config.strategy
    if s is Strategy.FIXED:
        return FixedTokenChunker(config.chunk_size, config.overlap, tokenizer)
    if s is Strategy.RECURSIVE:
        return RecursiveTokenChunker(config.chunk_size, config.overlap, tokenizer=tokenizer)
    if s is Strategy.KAMRADT_MODIFIED:
        return KamradtModifiedChunker(config.chunk_size, embedder, tokenizer)
    if s is Strategy.CLUSTER_SEMANTIC:
        return ClusterSemanticChunker(cluster_max_tokens, piece_size, embedder, tokenizer)
    if s is Strategy.LLM_SEMANTIC:
        return LLMSemanticChunker(llm_client, piece_size, tokenizer)
    raise ConfigError(f"unsupported strategy {s}")  # pragma: no cover


def token_cap(config: ChunkerConfig, cluster_max_tokens: int = 400) -> int | None:
    """Hard per-chunk token limit of a configuration, if it has one."""
    if config.strategy is Strategy.CLUSTER_SEMANTIC:
        return cluster_max_tokens
    if config.strategy is Strategy.LLM_SEMANTIC:
        return None
    return config.chunk_size


__all__ = [
    "BaseChunker", "Chunk", "ChunkerConfig", "ClusterSemanticChunker", "DEFAULT_SEPARATORS",
    "FixedTokenChunker", "GridSpec", "KamradtModifiedChunker", "LLMSemanticChunker",
    "RecursiveTokenChunker", "Strategy", "cluster_semantic_chunk", "default_grid_spec",
    "fixed_token_chunk", "format_short_name", "grid_configs", "kamradt_modified_chunk",
    "kamradt_semantic_chunk", "llm_semantic_chunk", "make_chunker", "optimal_partition",
    "parse_short_name", "parse_split_reply", "recursive_token_chunk", "token_cap",
]
