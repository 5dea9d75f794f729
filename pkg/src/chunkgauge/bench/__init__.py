"""Retrieval benchmarking: tasks, rank metrics, model evaluation and score analysis."""

from .analysis import (
    CrossTaskStats,
    KMeans,
    ModelPerformanceMatrix,
    cross_task_stats,
    kmeans,
    pca_project,
    read_scores,
    write_scores,
)
from .evaluate import IRMetrics, evaluate_model, paragraphs_from_documents
from .ir_metrics import map_at_k, mrr_at_k, ndcg_at_k, precision_at_k, recall_at_k
from .tasks import RetrievalTask, build_task, load_task, read_jsonl, write_task

__all__ = [
    "CrossTaskStats", "IRMetrics", "KMeans", "ModelPerformanceMatrix", "RetrievalTask",
    "build_task", "cross_task_stats", "evaluate_model", "kmeans", "load_task", "map_at_k",
    "mrr_at_k", "ndcg_at_k", "paragraphs_from_documents", "pca_project", "precision_at_k",
    "read_jsonl", "read_scores", "recall_at_k", "write_scores", "write_task",
]
