"""Command line: ``chunkgauge {chunk,grid,bench,build-task,stats}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 provider
error, 130 interrupted. Warnings and errors go to stderr as one JSON object
per line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .bench import (
    ModelPerformanceMatrix,
    build_task,
    cross_task_stats,
    evaluate_model,
    kmeans,
    load_task,
    paragraphs_from_documents,
    pca_project,
    read_jsonl,
    read_scores,
    write_scores,
    write_task,
)
from .chunk_eval import load_corpus_set, load_questions, run_grid
from .chunkers import grid_configs, make_chunker, parse_short_name
from .config import RunConfig, load_config
from .embeddings import RemoteLLMClient, StrideLLMClient, build_embedder
from .errors import ChunkGaugeError, ConfigError, DataError
from .tokenization import load_tokenizer

log = logging.getLogger("chunkgauge")


def _emit(record: dict) -> None:
    sys.stderr.write(json.dumps(record, ensure_ascii=False) + "\n")


class _JsonHandler(logging.Handler):
    def emit(self, record):
        _emit({"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()})


def _show_warning(message, category, filename, lineno, file=None, line=None):
    _emit({"level": "warning", "category": category.__name__, "message": str(message)})


def _fmt(x: float) -> str:
    return f"{x:.9g}"


# -- shared construction ----------------------------------------------------

def _tokenizer(cfg: RunConfig):
    return load_tokenizer(cfg.tokenizer, cfg.vocab_path)


def _embedder(cfg: RunConfig, name: str | None, tokenizer):
    return build_embedder(cfg.provider_config(name), tokenizer=tokenizer, cache_dir=cfg.paths.get("cache"),
                          max_concurrency=cfg.workers)


def _llm(cfg: RunConfig):
    if cfg.llm == "stride":
        return StrideLLMClient()
    p = cfg.provider_config(cfg.llm)
    if p.kind != "remote":
        raise ConfigError(f"llm provider {cfg.llm!r} must be remote")
    return RemoteLLMClient(p.endpoint, p.model_name, max_retries=p.max_retries, timeout=p.timeout)


def _read_doc(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except UnicodeDecodeError:
        raise DataError(f"{path} is not valid UTF-8") from None


def _writer(out: str | None):
    if out is None:
        return sys.stdout
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    return open(out, "w", encoding="utf-8", newline="\n")


# -- commands ---------------------------------------------------------------

def cmd_chunk(args, cfg: RunConfig) -> int:
    config = parse_short_name(args.short_name)
    path = Path(args.document)
    text = _read_doc(path)
    tokenizer = _tokenizer(cfg)
    embedder = _embedder(cfg, args.provider[0] if args.provider else None, tokenizer)
    chunker = make_chunker(config, tokenizer=tokenizer, embedder=embedder, llm_client=_llm(cfg),
                           cluster_max_tokens=cfg.cluster_max_tokens, piece_size=cfg.piece_size)
    chunks = chunker.split(text, path.stem) if text.strip() else []
    fh = _writer(args.out)
    try:
        for c in chunks:
            fh.write(json.dumps(c.to_dict(), ensure_ascii=False) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_grid(args, cfg: RunConfig) -> int:
    corpora = Path(args.corpora) if args.corpora else cfg.path("corpora")
    questions = Path(args.questions) if args.questions else cfg.path("questions")
    out = Path(args.out) if args.out else cfg.path("reports")
    tokenizer = _tokenizer(cfg)
    embedder = _embedder(cfg, args.provider[0] if args.provider else None, tokenizer)
    configs = [parse_short_name(n) for n in args.only] if args.only else grid_configs(cfg.grid)
    reports = run_grid(load_corpus_set(corpora), load_questions(questions), configs, embedder, cfg.k,
                       out_dir=out, tokenizer=tokenizer, llm_client=_llm(cfg), workers=cfg.workers,
                       cluster_max_tokens=cfg.cluster_max_tokens, piece_size=cfg.piece_size)
    finished = {r.config.short_name for r in reports}
    failed = [c.short_name for c in configs if c.short_name not in finished]
    print(json.dumps({"reports": len(reports), "failed": failed, "out": str(out)}))
    return 3 if failed else 0


def cmd_bench(args, cfg: RunConfig) -> int:
    names = args.provider or [cfg.provider]
    tasks = [load_task(d) for d in args.tasks]
    tokenizer = None
    rows = []
    for name in names:
        pconf = cfg.provider_config(name)
        if pconf.max_input_tokens is not None and tokenizer is None:
            tokenizer = _tokenizer(cfg)
        embedder = _embedder(cfg, name, tokenizer)
        for task in tasks:
            metrics = evaluate_model(task, embedder, cfg.k, workers=cfg.workers)
            for metric, score in metrics.scores().items():
                rows.append({"model": name, "task": task.name, "metric": metric, "score": score})
    out = args.out or (cfg.paths["reports"] / "scores.csv" if "reports" in cfg.paths else None)
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["model", "task", "metric", "score"])
        for r in rows:
            w.writerow([r["model"], r["task"], r["metric"], _fmt(r["score"])])
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_scores(rows, out)
    return 0


def cmd_build_task(args, cfg: RunConfig) -> int:
    qa = read_jsonl(args.qa)
    src = Path(args.paragraphs)
    if src.is_dir():
        docs = {p.stem: _read_doc(p) for p in sorted(src.glob("*.txt"))}
        paragraphs = paragraphs_from_documents(docs, _tokenizer(cfg))
    else:
        paragraphs = read_jsonl(src)
    out = Path(args.out_dir or args.out or ".")
    task = build_task(qa, paragraphs, name=out.name)
    write_task(task, out)
    nq, nc, nr = task.counts
    print(json.dumps({"queries": nq, "corpus": nc, "qrels": nr}))
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    matrix = ModelPerformanceMatrix.from_records(read_scores(args.scores))
    stats = cross_task_stats(matrix, args.metric)
    table = io.StringIO()
    w = csv.writer(table, lineterminator="\n")
    w.writerow(["task", "median", "q1", "q3", "iqr", "delta"])
    for s in stats:
        w.writerow([s.task, _fmt(s.median), _fmt(s.q1), _fmt(s.q3), _fmt(s.iqr), _fmt(s.delta)])

    n, d = matrix.values.shape
    n_comp = min(2, n - 1, d)
    if n_comp >= 1:
        proj, _, _ = pca_project(matrix.values, n_comp)
    else:
        proj = np.zeros((n, 1))
    distinct = len(np.unique(np.round(proj, 12), axis=0))
    labels, _, _ = kmeans(proj, k=min(args.clusters, distinct), seed=cfg.seed)
    relabel: dict[int, int] = {}
    for lab in labels:
        relabel.setdefault(int(lab), len(relabel))
    clusters = io.StringIO()
    w = csv.writer(clusters, lineterminator="\n")
    w.writerow(["model", "cluster"] + [f"pc{i + 1}" for i in range(proj.shape[1])])
    for model, lab, row in zip(matrix.models, labels, proj):
        w.writerow([model, relabel[int(lab)]] + [_fmt(float(v) + 0.0) for v in row])

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cross_task.csv").write_text(table.getvalue(), encoding="utf-8")
        (out / "clusters.csv").write_text(clusters.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(table.getvalue() + "\n" + clusters.getvalue())
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (default: $CHUNKGAUGE_CONFIG)")
    common.add_argument("--k", type=int, help="retrieval depth (default 10)")
    common.add_argument("--seed", type=int, help="seed for stochastic steps")
    common.add_argument("--provider", action="append", help="embedding provider name; repeatable for bench")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="chunkgauge",
                                     description="Chunking evaluation and dense-retrieval benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chunk", parents=[common], help="chunk one document to JSONL")
    p.add_argument("document")
    p.add_argument("short_name", help="e.g. RT100-0, FX64-12, K200, CL, LLM")
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("grid", parents=[common], help="evaluate a chunking grid")
    p.add_argument("--corpora")
    p.add_argument("--questions")
    p.add_argument("--only", nargs="+", metavar="NAME", help="evaluate just these short names")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("bench", parents=[common], help="score embedding providers on retrieval tasks")
    p.add_argument("tasks", nargs="+", help="task directories")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("build-task", parents=[common], help="build a retrieval task from QA pairs")
    p.add_argument("qa", help="QA JSONL")
    p.add_argument("paragraphs", help="paragraph JSONL, or a directory of .txt documents")
    p.add_argument("out_dir", nargs="?")
    p.set_defaults(func=cmd_build_task)

    p = sub.add_parser("stats", parents=[common], help="cross-task spread and model clusters")
    p.add_argument("scores", help="scores CSV (model,task,metric,score)")
    p.add_argument("--metric", default="main_score")
    p.add_argument("--clusters", type=int, default=4)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = _JsonHandler()
    root = logging.getLogger("chunkgauge")
    root.addHandler(handler)
    root.setLevel(logging.INFO if args.verbose else logging.WARNING)
    saved = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        cfg = load_config(args.config)
        if args.k is not None:
            if args.k < 1:
                raise ConfigError("--k must be >= 1")
            cfg.k = args.k
        if args.seed is not None:
            cfg.seed = args.seed
        return args.func(args, cfg)
    except ChunkGaugeError as exc:
        _emit({"level": "error", "type": type(exc).__name__, "message": str(exc)})
        return exc.exit_code
    except KeyboardInterrupt:
        _emit({"level": "error", "type": "KeyboardInterrupt", "message": "interrupted; finished work is checkpointed"})
        return 130
    finally:
        warnings.showwarning = saved
        root.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
