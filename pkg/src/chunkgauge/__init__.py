"""Chunking strategies, span-level chunking metrics and dense-retrieval benchmarking."""

from .chunk_eval import (
    ChunkEvalReport,
    QuestionRecord,
    SpanMetrics,
    evaluate_chunking,
    gold_token_set,
    load_corpus_set,
    load_questions,
    precision_omega,
    run_grid,
    span_metrics,
)
from .chunkers import ChunkerConfig, default_grid_spec, grid_configs, make_chunker, parse_short_name
from .embeddings import DeterministicEmbedder, ProviderConfig, build_embedder
from .errors import (
    ChunkGaugeError,
    ChunkingWarning,
    ConfigError,
    DataError,
    IntegrityError,
    ProviderError,
)
from .tokenization import BPETokenizer, CharSpan, WhitespaceTokenizer, load_tokenizer
from .vectorstore import VectorIndex

__version__ = "0.1.0"

__all__ = [
    "BPETokenizer", "CharSpan", "ChunkEvalReport", "ChunkGaugeError", "ChunkerConfig",
    "ChunkingWarning", "ConfigError", "DataError", "DeterministicEmbedder", "IntegrityError",
    "ProviderConfig", "ProviderError", "QuestionRecord", "SpanMetrics", "VectorIndex",
    "WhitespaceTokenizer", "build_embedder", "default_grid_spec", "evaluate_chunking",
    "gold_token_set", "grid_configs", "load_corpus_set", "load_questions", "load_tokenizer",
    "make_chunker", "parse_short_name", "precision_omega", "run_grid", "span_metrics",
]
