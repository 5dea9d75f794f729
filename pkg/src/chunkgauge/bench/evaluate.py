"""Dense-retrieval evaluation of one embedding model on one task."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from ..chunkers import make_chunker
from ..embeddings import Embedder
from ..tokenization import Tokenizer
from ..vectorstore import VectorIndex
from .ir_metrics import map_at_k, mrr_at_k, ndcg_at_k, precision_at_k, recall_at_k
from .tasks import RetrievalTask

DEFAULT_RECIPE = "RT100-0"


@dataclass
class IRMetrics:
    """Means over judged queries. ``main_score`` is nDCG at k."""

    main_score: float
    ndcg_at_10: float
    map_at_10: float
    recall_at_10: float
    precision_at_10: float
    mrr_at_10: float
    k: int = 10
    n_queries: int = 0
    per_query: dict = field(default_factory=dict, repr=False)

    def scores(self) -> dict[str, float]:
        """The six headline metrics, named with the actual cutoff."""
        d = asdict(self)
        return {("main_score" if name == "main_score" else name.replace("_10", f"_{self.k}")): d[name]
                for name in ("main_score", "ndcg_at_10", "map_at_10", "recall_at_10",
                             "precision_at_10", "mrr_at_10")}


def corpus_text(title: str, text: str) -> str:
    return f"{title} {text}" if title else text


def evaluate_model(task: RetrievalTask, embedder: Embedder, k: int = 10, workers: int = 1) -> IRMetrics:
    """Encode queries and corpus independently, search exactly, average per-query metrics."""
    cids = sorted(task.corpus)
    index = VectorIndex(embedder.dims)
    index.insert_many(cids, embedder.embed_batch([corpus_text(*task.corpus[c]) for c in cids]))
    index.freeze()

    qids = sorted(task.judged_queries())
    qvecs = embedder.embed_batch([task.queries[q] for q in qids]) if qids else np.zeros((0, embedder.dims))

    def score(item):
        qid, vec = item
        ranked = [cid for cid, _ in index.search(vec, k)]
        rel = task.qrels[qid]
        return qid, (ndcg_at_k(ranked, rel, k), map_at_k(ranked, rel, k), recall_at_k(ranked, rel, k),
                     precision_at_k(ranked, rel, k), mrr_at_k(ranked, rel, k))

    items = list(zip(qids, qvecs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_query = dict(pool.map(score, items))
    else:
        per_query = dict(map(score, items))
    means = np.mean(list(per_query.values()), axis=0) if per_query else np.zeros(5)
    ndcg, map_, rec, prec, mrr = (float(x) for x in means)
    return IRMetrics(ndcg, ndcg, map_, rec, prec, mrr, k, len(per_query), per_query)


def paragraphs_from_documents(docs: Mapping[str, str], tokenizer: Tokenizer | None = None,
                              recipe: str = DEFAULT_RECIPE) -> list[dict]:
    """Cut raw documents into corpus paragraphs with a chunking recipe."""
    chunker = make_chunker(recipe, tokenizer=tokenizer)
    out = []
    for doc_id in sorted(docs):
        for c in chunker.split(docs[doc_id], doc_id):
            if c.text.strip():
                out.append({"doc_id": doc_id, "ordinal": c.index, "text": c.text})
    return out
