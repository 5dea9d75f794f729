"""Span-based evaluation of chunking configurations.

Each question carries gold excerpts as character spans in one document.
Chunks of that document's corpus are embedded and indexed, the question is
embedded and the top-k chunks are retrieved, and gold and retrieved text are
compared as sets of tokens of the source documents.
"""

from __future__ import annotations

import bisect
import csv
import json
import logging
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .chunkers import ChunkerConfig, grid_configs, make_chunker, parse_short_name
from .chunkers.grid import GridSpec
from .embeddings import Embedder
from .errors import ChunkGaugeError, DataError
from .tokenization import CharSpan, TokenSequence, Tokenizer, WhitespaceTokenizer
from .vectorstore import VectorIndex

log = logging.getLogger(__name__)

METRICS = ("iou", "precision", "recall", "f1", "f2", "precision_omega")
SIG_DIGITS = 9


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    question: str
    doc_id: str
    excerpts: tuple[CharSpan, ...]

    def __post_init__(self):
        if not self.excerpts:
            raise DataError(f"question {self.id!r} has no excerpts")


@dataclass(frozen=True)
class SpanMetrics:
    iou: float
    precision: float
    recall: float
    f1: float
    f2: float

    def as_dict(self) -> dict[str, float]:
        return {"iou": self.iou, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "f2": self.f2}


# -- inputs ---------------------------------------------------------------

def load_questions(path: str | os.PathLike) -> list[QuestionRecord]:
    """Read questions JSONL: ``{id, question, doc_id, excerpts: [{start, end}]}``."""
    out, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                qid = str(rec["id"])
                spans = tuple(CharSpan(int(e["start"]), int(e["end"])) for e in rec["excerpts"])
                q = QuestionRecord(qid, str(rec["question"]), str(rec["doc_id"]), spans)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed question record ({exc})") from None
            if qid in seen:
                raise DataError(f"{path}:{lineno}: duplicate question id {qid!r}")
            seen.add(qid)
            out.append(q)
    return out


def load_corpus_set(root: str | os.PathLike) -> dict[str, dict[str, str]]:
    """Map corpus name to ``{doc_id: text}``.

    Each subdirectory of ``root`` is one corpus; ``.txt`` files directly under
    ``root`` form a corpus named after ``root`` itself. A document id is its
    file stem and must be unique across the whole set.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus directory {root} does not exist")
    corpora: dict[str, dict[str, str]] = {}
    loose = sorted(root.glob("*.txt"))
    if loose:
        corpora[root.name] = {p.stem: _read_text(p) for p in loose}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        docs = {p.stem: _read_text(p) for p in sorted(sub.glob("*.txt"))}
        if docs:
            corpora[sub.name] = docs
    owner: dict[str, str] = {}
    for name, docs in corpora.items():
        for doc_id in docs:
            if doc_id in owner:
                raise DataError(f"document id {doc_id!r} appears in corpora {owner[doc_id]!r} and {name!r}")
            owner[doc_id] = name
    return corpora


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8") from exc


# -- token sets -----------------------------------------------------------

class TokenIndex:
    """Maps character spans of one document to contiguous token index ranges.

    A token belongs to a span when their character ranges overlap; a
    zero-width token belongs to the span containing its position.
    """

    def __init__(self, tokens: TokenSequence):
        self.starts = tokens.starts
        self._ends = [e if e > s else s + 0.5 for s, e in zip(self.starts, tokens.ends)]

    def __len__(self) -> int:
        return len(self.starts)

    def range(self, start: int, end: int) -> range:
        lo = bisect.bisect_right(self._ends, start)
        hi = bisect.bisect_left(self.starts, end)
        return range(lo, max(lo, hi))


def gold_token_set(document: str, excerpts: Iterable[CharSpan], tokenizer: Tokenizer | None = None,
                   question_id: str | None = None, index: TokenIndex | None = None) -> set[int]:
    """Indices of the tokens of ``document`` that overlap any excerpt."""
    excerpts = list(excerpts)
    for span in excerpts:
        if span.end > len(document):
            raise DataError(f"question {question_id!r}: excerpt [{span.start}, {span.end}) "
                            f"exceeds document length {len(document)}")
    if index is None:
        index = TokenIndex((tokenizer or WhitespaceTokenizer()).encode(document))
    gold: set[int] = set()
    for span in excerpts:
        gold.update(index.range(span.start, span.end))
    if not gold:
        warnings.warn(f"question {question_id!r}: excerpts cover no tokens", stacklevel=2)
    return gold


def span_metrics(gold: set, retrieved: set) -> SpanMetrics:
    inter = len(gold & retrieved)
    union = len(gold) + len(retrieved) - inter
    p = inter / len(retrieved) if retrieved else 0.0
    r = inter / len(gold) if gold else 0.0
    iou = inter / union if union else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    f2 = 5 * p * r / (4 * p + r) if 4 * p + r else 0.0
    return SpanMetrics(iou, p, r, f1, f2)


def precision_omega(gold: Iterable[int], chunks: Sequence[range | tuple[int, int]]) -> float:
    """Best precision any set of chunks can reach while retrieving all of ``gold``.

    ``chunks`` are the token ranges ``[start, end)`` of one document's chunks.
    For partitions this is the precision of the chunks that touch the gold
    set. An optimal set never keeps a chunk nested inside another, so its
    members are ordered by both start and end, and the smallest covering
    union is found by dynamic programming over such chains. If no set covers
    the gold tokens, all chunks touching them are used.
    """
    g = sorted(set(gold))
    if not g:
        return 0.0
    spans = sorted({(c.start, c.stop) if isinstance(c, range) else tuple(c) for c in chunks})
    spans = [(s, e) for s, e in spans if e > s]

    def gold_in(lo: float, hi: float) -> bool:
        i = bisect.bisect_left(g, lo)
        return i < len(g) and g[i] < hi

    # best[j]: smallest union of a chain ending at span j that covers all gold before its end
    best = [math.inf] * len(spans)
    for j, (s, e) in enumerate(spans):
        if not gold_in(0, s):
            best[j] = e - s
        for i in range(j):
            pe = spans[i][1]
            if best[i] < math.inf and pe <= e and not gold_in(pe, s):
                cost = best[i] + (e - s) - max(0, pe - s)
                if cost < best[j]:
                    best[j] = cost
    union = min((best[j] for j, (s, e) in enumerate(spans) if not gold_in(e, math.inf)),
                default=math.inf)
    if union < math.inf:
        return len(g) / union
    touched: set[int] = set()
    for s, e in spans:
        if gold_in(s, e):
            touched.update(range(s, e))
    return len(touched.intersection(g)) / len(touched) if touched else 0.0


# -- evaluation -----------------------------------------------------------

def _round(x: float) -> float:
    return float(f"{x:.{SIG_DIGITS}g}")


def _summary(values: Sequence[float]) -> dict[str, float]:
    if not values:
        return {"mean": 0.0, "std": 0.0}
    a = np.asarray(values, dtype=np.float64)
    return {"mean": _round(a.mean()), "std": _round(a.std())}


def _aggregate(rows: Sequence[Mapping]) -> dict:
    out: dict = {"n_questions": len(rows)}
    for m in METRICS:
        out[m] = _summary([r[m] for r in rows])
    return out


@dataclass
class ChunkEvalReport:
    """Per-question rows plus per-corpus and global mean/std of every metric.

    ``global_`` averages over all questions; ``corpus_mean`` averages the
    per-corpus means, with the std taken across corpora.
    """

    config: ChunkerConfig
    k: int
    provenance: dict
    counts: dict = field(default_factory=dict)
    global_: dict = field(default_factory=dict)
    corpus_mean: dict = field(default_factory=dict)
    per_corpus: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config.short_name,
            "k": self.k,
            "provenance": self.provenance,
            "counts": self.counts,
            "global": self.global_,
            "corpus_mean": self.corpus_mean,
            "per_corpus": self.per_corpus,
            "questions": self.rows,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "ChunkEvalReport":
        return cls(parse_short_name(d["config"]), d["k"], d["provenance"], d["counts"], d["global"],
                   d["corpus_mean"], d["per_corpus"], d["questions"], d["warnings"])


@dataclass
class _Corpus:
    name: str
    index: VectorIndex
    ranges: dict[str, range]  # chunk_id -> token range in its document
    doc_of: dict[str, str]  # chunk_id -> doc_id
    by_doc: dict[str, list[range]]


def _build_corpus(name: str, docs: Mapping[str, str], chunker, embedder: Embedder,
                  token_index: Mapping[str, TokenIndex]) -> _Corpus:
    ids, texts, ranges, doc_of, by_doc = [], [], {}, {}, {}
    for doc_id in sorted(docs):
        chunks = chunker.split(docs[doc_id], doc_id)
        tix = token_index[doc_id]
        by_doc[doc_id] = []
        for c in chunks:
            if not c.text.strip():
                continue
            r = tix.range(c.span.start, c.span.end)
            ids.append(c.chunk_id)
            texts.append(c.text)
            ranges[c.chunk_id] = r
            doc_of[c.chunk_id] = doc_id
            by_doc[doc_id].append(r)
    index = VectorIndex(embedder.dims)
    if texts:
        index.insert_many(ids, embedder.embed_batch(texts))
    return _Corpus(name, index.freeze(), ranges, doc_of, by_doc)


def _document_owners(corpus_set, questions) -> dict[str, str]:
    owner = {doc_id: name for name, docs in corpus_set.items() for doc_id in docs}
    for q in questions:
        if q.doc_id not in owner:
            raise DataError(f"question {q.id!r} references unknown document {q.doc_id!r}")
    return owner


def evaluate_chunking(corpus_set: Mapping[str, Mapping[str, str]], questions: Sequence[QuestionRecord],
                      config: ChunkerConfig | str, embedder: Embedder, k: int = 10,
                      tokenizer: Tokenizer | None = None, llm_client=None, workers: int = 1,
                      cluster_max_tokens: int = 400, piece_size: int = 50) -> ChunkEvalReport:
    """Chunk, index and score every question for one configuration.

    Retrieved chunks from documents other than the question's gold document
    still count toward the retrieved set, so they lower precision. Questions
    whose excerpts cover no tokens are left out of the aggregates and
    counted under ``counts.skipped``.
    """
    if isinstance(config, str):
        config = parse_short_name(config)
    if k < 1:
        raise DataError("k must be >= 1")
    tokenizer = tokenizer or WhitespaceTokenizer()
    owner = _document_owners(corpus_set, questions)

    provenance = {"tokenizer": tokenizer.name, "embedder": embedder.identifier}
    if llm_client is not None:
        provenance["llm"] = getattr(llm_client, "identifier", type(llm_client).__name__)
    report = ChunkEvalReport(config, k, provenance)
    if not questions:
        report.counts = {"corpora": 0, "documents": 0, "chunks": 0, "questions": 0, "skipped": 0}
        report.global_ = _aggregate([])
        report.corpus_mean = _aggregate([])
        return report

    needed = sorted({owner[q.doc_id] for q in questions})
    chunker = make_chunker(config, tokenizer=tokenizer, embedder=embedder, llm_client=llm_client,
                           cluster_max_tokens=cluster_max_tokens, piece_size=piece_size)
    token_index = {doc_id: TokenIndex(tokenizer.encode(text))
                   for name in needed for doc_id, text in corpus_set[name].items()}

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        corpora = {name: _build_corpus(name, corpus_set[name], chunker, embedder, token_index)
                   for name in needed}
        gold = {q.id: gold_token_set(corpus_set[owner[q.doc_id]][q.doc_id], q.excerpts,
                                     question_id=q.id, index=token_index[q.doc_id])
                for q in questions}
    messages: dict[str, int] = {}
    for w in caught:
        messages[str(w.message)] = messages.get(str(w.message), 0) + 1
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    report.warnings = [{"message": m, "count": n} for m, n in messages.items()]

    scored = sorted((q for q in questions if gold[q.id]), key=lambda q: q.id)
    qvecs = embedder.embed_batch([q.question for q in scored]) if scored else []

    def score(item):
        q, vec = item
        corpus = corpora[owner[q.doc_id]]
        g = {(q.doc_id, t) for t in gold[q.id]}
        hits = corpus.index.search(vec, k) if len(corpus.index) else []
        retrieved = {(corpus.doc_of[cid], t) for cid, _ in hits for t in corpus.ranges[cid]}
        m = span_metrics(g, retrieved).as_dict()
        m["precision_omega"] = precision_omega(gold[q.id], corpus.by_doc.get(q.doc_id, []))
        row = {"id": q.id, "corpus": corpus.name, "doc_id": q.doc_id}
        row.update({name: _round(v) for name, v in m.items()})
        row["retrieved"] = [cid for cid, _ in hits]
        return row

    items = list(zip(scored, qvecs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(score, items))
    else:
        rows = [score(it) for it in items]

    report.rows = rows
    report.counts = {
        "corpora": len(corpora),
        "documents": sum(len(corpus_set[n]) for n in needed),
        "chunks": sum(len(c.index) for c in corpora.values()),
        "questions": len(questions),
        "skipped": len(questions) - len(scored),
    }
    report.global_ = _aggregate(rows)
    for name in needed:
        report.per_corpus[name] = _aggregate([r for r in rows if r["corpus"] == name])
    means = [report.per_corpus[n] for n in needed if report.per_corpus[n]["n_questions"]]
    report.corpus_mean = {"n_corpora": len(means)}
    for m in METRICS:
        report.corpus_mean[m] = _summary([c[m]["mean"] for c in means])
    return report


# -- grid -----------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def run_grid(corpus_set, questions, grid: GridSpec | Sequence[ChunkerConfig] | None, embedder: Embedder,
             k: int = 10, out_dir: str | os.PathLike | None = None, **kwargs) -> list[ChunkEvalReport]:
    """Evaluate every configuration of ``grid``.

    With ``out_dir`` each finished configuration is written as
    ``<short name>.json`` followed by a ``<short name>.done`` marker, and a
    rerun skips configurations that already have a marker. A configuration
    that raises is recorded in ``<short name>.failed`` and the grid moves
    on. ``summary.csv`` holds the global mean and std of every metric.
    """
    configs = grid_configs(grid) if grid is None or isinstance(grid, GridSpec) else list(grid)
    _document_owners(corpus_set, questions)  # bad input fails every config, so fail once up front
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    reports = []
    for config in configs:
        name = config.short_name
        if out is not None:
            done, path, failed = out / f"{name}.done", out / f"{name}.json", out / f"{name}.failed"
            if done.exists() and path.exists():
                reports.append(ChunkEvalReport.from_dict(json.loads(path.read_text(encoding="utf-8"))))
                continue
        try:
            report = evaluate_chunking(corpus_set, questions, config, embedder, k, **kwargs)
        except ChunkGaugeError as exc:
            if exc.exit_code == 4:  # provider outage: stop, finished configs stay checkpointed
                raise
            log.error("config %s failed: %s", name, exc)
            if out is not None:
                _atomic_write(failed, f"{type(exc).__name__}: {exc}\n")
            continue
        reports.append(report)
        if out is not None:
            _atomic_write(path, report.to_json())
            failed.unlink(missing_ok=True)
            done.write_text("")
    if out is not None:
        write_summary(reports, out / "summary.csv")
    return reports


def write_summary(reports: Sequence[ChunkEvalReport], path: str | os.PathLike) -> None:
    path = Path(path)
    lines = [["config", "metric", "mean", "std"]]
    for r in reports:
        for m in METRICS:
            s = r.global_[m]
            lines.append([r.config.short_name, m, f"{s['mean']:.{SIG_DIGITS}g}", f"{s['std']:.{SIG_DIGITS}g}"])
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(lines)
    os.replace(tmp, path)
