"""Retrieval tasks in the MTEB file layout.

A task directory holds ``queries.jsonl`` (``_id``, ``text``, optional
``metadata``), ``corpus.jsonl`` (``_id``, ``title``, ``text``) and
``qrels/test.jsonl`` (``query-id``, ``corpus-id``, ``score``).
"""

from __future__ import annotations

import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from ..errors import DataError

log = logging.getLogger(__name__)


@dataclass
class RetrievalTask:
    queries: dict[str, str]
    corpus: dict[str, tuple[str, str]]
    qrels: dict[str, dict[str, int]]
    name: str = "task"
    metadata: dict[str, dict] = field(default_factory=dict)

    @property
    def counts(self) -> tuple[int, int, int]:
        """(queries, corpus entries, query-document pairs)."""
        return len(self.queries), len(self.corpus), sum(len(v) for v in self.qrels.values())

    def validate(self) -> "RetrievalTask":
        if not self.qrels:
            raise DataError(f"task {self.name!r} has no relevance judgments")
        bad_q = sorted(q for q in self.qrels if q not in self.queries)
        bad_c = sorted({c for rel in self.qrels.values() for c in rel if c not in self.corpus})
        if bad_q or bad_c:
            raise DataError(f"task {self.name!r} has dangling qrels: "
                            f"unknown query ids {bad_q[:20]}, unknown corpus ids {bad_c[:20]}")
        for q, rel in self.qrels.items():
            for c, grade in rel.items():
                if not isinstance(grade, int) or grade < 0:
                    raise DataError(f"qrel ({q}, {c}) has invalid grade {grade!r}")
        unjudged = [q for q in self.queries if not any(g >= 1 for g in self.qrels.get(q, {}).values())]
        if unjudged:
            warnings.warn(f"task {self.name!r}: {len(unjudged)} queries have no relevant document "
                          "and are skipped in evaluation", stacklevel=2)
        return self

    def judged_queries(self) -> list[str]:
        return [q for q in self.queries if any(g >= 1 for g in self.qrels.get(q, {}).values())]


def _jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"missing task file {path}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, rec


def _field(path: Path, lineno: int, rec: dict, key: str):
    if key not in rec:
        raise DataError(f"{path}:{lineno}: missing field {key!r}")
    return rec[key]


def load_task(directory: str | os.PathLike, split: str = "test") -> RetrievalTask:
    directory = Path(directory)
    queries, metadata = {}, {}
    qpath = directory / "queries.jsonl"
    for lineno, rec in _jsonl(qpath):
        qid = str(_field(qpath, lineno, rec, "_id"))
        queries[qid] = str(_field(qpath, lineno, rec, "text"))
        if rec.get("metadata"):
            metadata[qid] = rec["metadata"]
    corpus = {}
    cpath = directory / "corpus.jsonl"
    for lineno, rec in _jsonl(cpath):
        cid = str(_field(cpath, lineno, rec, "_id"))
        corpus[cid] = (str(rec.get("title") or ""), str(_field(cpath, lineno, rec, "text")))
    qrels: dict[str, dict[str, int]] = {}
    rpath = directory / "qrels" / f"{split}.jsonl"
    for lineno, rec in _jsonl(rpath):
        qid = str(_field(rpath, lineno, rec, "query-id"))
        cid = str(_field(rpath, lineno, rec, "corpus-id"))
        try:
            grade = int(_field(rpath, lineno, rec, "score"))
        except (TypeError, ValueError):
            raise DataError(f"{rpath}:{lineno}: score must be an integer") from None
        qrels.setdefault(qid, {})[cid] = grade
    task = RetrievalTask(queries, corpus, qrels, directory.name, metadata).validate()
    log.info("loaded task %s: %d queries, %d corpus entries, %d qrels", task.name, *task.counts)
    return task


def write_task(task: RetrievalTask, directory: str | os.PathLike, split: str = "test") -> None:
    directory = Path(directory)
    (directory / "qrels").mkdir(parents=True, exist_ok=True)

    def dump(path: Path, records: Iterable[dict]):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    dump(directory / "queries.jsonl",
         ({"_id": q, "text": t, **({"metadata": task.metadata[q]} if q in task.metadata else {})}
          for q, t in task.queries.items()))
    dump(directory / "corpus.jsonl",
         ({"_id": c, "title": title, "text": text} for c, (title, text) in task.corpus.items()))
    dump(directory / "qrels" / f"{split}.jsonl",
         ({"query-id": q, "corpus-id": c, "score": g} for q, rel in task.qrels.items() for c, g in rel.items()))


def paragraph_id(doc_id: str, ordinal: int) -> str:
    return f"{doc_id}-p{ordinal}"


def build_task(qa_records: Iterable[Mapping], paragraphs: Iterable[Mapping], name: str = "task") -> RetrievalTask:
    """Turn question-answer pairs with source paragraphs into a retrieval task.

    ``paragraphs`` are ``{doc_id, ordinal, text, title?}``; every paragraph
    becomes a corpus entry ``<doc_id>-p<ordinal>``. Each QA record is
    ``{id, question, sources}`` where a source is a corpus id string or a
    ``{doc_id, ordinal}`` object; each resolvable source gets grade 1. QA
    records without any resolvable source are dropped with a warning.
    """
    corpus: dict[str, tuple[str, str]] = {}
    for p in paragraphs:
        try:
            cid = paragraph_id(str(p["doc_id"]), int(p["ordinal"]))
            text = str(p["text"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed paragraph record: {exc}") from None
        if cid in corpus:
            raise DataError(f"duplicate paragraph {cid}")
        corpus[cid] = (str(p.get("title") or ""), text)

    queries, qrels, dropped = {}, {}, 0
    for i, qa in enumerate(qa_records):
        if "question" not in qa:
            raise DataError(f"QA record #{i} has no question")
        qid = str(qa.get("id", f"q{i}"))
        if qid in queries:
            raise DataError(f"duplicate QA id {qid!r}")
        rel = {}
        for src in qa.get("sources") or []:
            cid = src if isinstance(src, str) else paragraph_id(str(src.get("doc_id")), int(src.get("ordinal", -1)))
            if cid in corpus:
                rel[cid] = 1
        if not rel:
            dropped += 1
            continue
        queries[qid] = str(qa["question"])
        qrels[qid] = rel
    if dropped:
        warnings.warn(f"dropped {dropped} QA records without a resolvable source paragraph", stacklevel=2)
    return RetrievalTask(queries, corpus, qrels, name).validate()


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    return [rec for _, rec in _jsonl(Path(path))]
