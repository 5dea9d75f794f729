"""Rank metrics for one query: nDCG, MAP, MRR, precision and recall at k.

``qrels_q`` maps corpus ids to integer relevance grades; a grade of 1 or
more counts as relevant for the binary metrics.
"""

from __future__ import annotations

import math
import warnings
from typing import Mapping, Sequence

from ..errors import DataError


def _top(ranked: Sequence[str], k: int) -> Sequence[str]:
    if k < 1:
        raise DataError("k must be >= 1")
    top = ranked[:k]
    if len(set(top)) != len(top):
        raise DataError("ranked list contains duplicate ids")
    return top


def _relevant(qrels_q: Mapping[str, int]) -> set[str]:
    return {cid for cid, grade in qrels_q.items() if grade >= 1}


def ndcg_at_k(ranked: Sequence[str], qrels_q: Mapping[str, int], k: int = 10) -> float:
    """Graded gain ``2**rel - 1`` discounted by ``log2(rank + 1)``."""
    top = _top(ranked, k)
    dcg = sum((2 ** qrels_q.get(cid, 0) - 1) / math.log2(i + 2) for i, cid in enumerate(top))
    ideal = sorted((g for g in qrels_q.values() if g > 0), reverse=True)[:k]
    idcg = sum((2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(ideal))
    return dcg / idcg if idcg > 0 else 0.0


def map_at_k(ranked: Sequence[str], qrels_q: Mapping[str, int], k: int = 10) -> float:
    top = _top(ranked, k)
    rel = _relevant(qrels_q)
    if not rel:
        return 0.0
    hits, total = 0, 0.0
    for i, cid in enumerate(top, 1):
        if cid in rel:
            hits += 1
            total += hits / i
    return total / min(len(rel), k)


def mrr_at_k(ranked: Sequence[str], qrels_q: Mapping[str, int], k: int = 10) -> float:
    rel = _relevant(qrels_q)
    for i, cid in enumerate(_top(ranked, k), 1):
        if cid in rel:
            return 1.0 / i
    return 0.0


def precision_at_k(ranked: Sequence[str], qrels_q: Mapping[str, int], k: int = 10) -> float:
    """Hits in the top k divided by k, even when fewer than k ids are ranked."""
    rel = _relevant(qrels_q)
    return sum(cid in rel for cid in _top(ranked, k)) / k


def recall_at_k(ranked: Sequence[str], qrels_q: Mapping[str, int], k: int = 10) -> float:
    rel = _relevant(qrels_q)
    top = _top(ranked, k)
    if not rel:
        warnings.warn("recall of a query without relevant documents is reported as 0", stacklevel=2)
        return 0.0
    return sum(cid in rel for cid in top) / len(rel)
