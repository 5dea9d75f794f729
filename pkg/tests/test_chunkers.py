import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from chunkgauge.chunkers import (
    ChunkerConfig,
    FixedTokenChunker,
    GridSpec,
    RecursiveTokenChunker,
    Strategy,
    cluster_semantic_chunk,
    default_grid_spec,
    fixed_token_chunk,
    format_short_name,
    grid_configs,
    kamradt_modified_chunk,
    kamradt_semantic_chunk,
    llm_semantic_chunk,
    make_chunker,
    optimal_partition,
    parse_short_name,
    parse_split_reply,
    recursive_token_chunk,
)
from chunkgauge.chunkers.cluster import partition_objective
from chunkgauge.chunkers.kamradt import split_sentences
from chunkgauge.embeddings import DeterministicEmbedder, ScriptedLLMClient, StrideLLMClient
from chunkgauge.errors import ChunkingWarning, ConfigError
from chunkgauge.tokenization import WhitespaceTokenizer

from conftest import TableEmbedder, random_doc

WS = WhitespaceTokenizer()


def words(n, prefix="w"):
    return " ".join(f"{prefix}{i}" for i in range(n))


def check_chunks(doc, chunks, tokenizer=WS, cap=None):
    for i, c in enumerate(chunks):
        assert c.text == doc[c.span.start:c.span.end]
        assert c.token_count == tokenizer.count_tokens(c.text) >= 1
        assert c.index == i
        if cap is not None:
            assert c.token_count <= cap


# -- short names and grid --------------------------------------------------

@pytest.mark.parametrize("name,strategy,size,overlap", [
    ("RT100-0", Strategy.RECURSIVE, 100, 0),
    ("FX64-12", Strategy.FIXED, 64, 12),
    ("K200", Strategy.KAMRADT_MODIFIED, 200, None),
    ("CL", Strategy.CLUSTER_SEMANTIC, None, None),
    ("LLM", Strategy.LLM_SEMANTIC, None, None),
])
def test_parse_short_name(name, strategy, size, overlap):
    cfg = parse_short_name(name)
    assert (cfg.strategy, cfg.chunk_size, cfg.overlap) == (strategy, size, overlap)
    assert format_short_name(cfg) == name


@pytest.mark.parametrize("bad", ["RT100", "XX100-0", "RT0-0", "RT100-100", "RT100-150", "K", "K0",
                                 "FX064-1", "cl", "RT100-01", "", "LLM5"])
def test_parse_short_name_rejects(bad):
    with pytest.raises(ConfigError):
        parse_short_name(bad)


@given(st.sampled_from(["RT", "FX"]), st.integers(1, 5000), st.data())
def test_short_name_round_trip(family, size, data):
    overlap = data.draw(st.integers(0, size - 1))
    name = f"{family}{size}-{overlap}"
    assert parse_short_name(name).short_name == name


def test_default_grid():
    configs = grid_configs(default_grid_spec())
    names = [c.short_name for c in configs]
    assert len(names) == 25 == len(set(names))
    for n in ["RT100-0", "FX64-12", "FX512-100", "K50", "K400", "CL", "LLM", "RT100-80", "FX100-0"]:
        assert n in names


def test_grid_edge_cases():
    assert grid_configs(None) == grid_configs(default_grid_spec())
    assert grid_configs(GridSpec()) == []
    assert [c.short_name for c in grid_configs(GridSpec(kamradt_sizes=[50, 100, 200, 400]))] == \
        ["K50", "K100", "K200", "K400"]
    with pytest.raises(ConfigError):
        grid_configs(GridSpec(kamradt_sizes=[50, 50]))
    with pytest.raises(ConfigError):
        grid_configs(GridSpec(names=["RT100-0", "RT100-0"]))
    # overlap between two sweeps is deduplicated
    spec = GridSpec(recursive_sizes=[(100, 20)], overlap_size=100, overlap_values=[0, 20])
    assert [c.short_name for c in grid_configs(spec)] == ["RT100-20", "FX100-0", "FX100-20", "RT100-0"]


def test_config_validation():
    with pytest.raises(ConfigError):
        ChunkerConfig(Strategy.FIXED, 0, 0)
    with pytest.raises(ConfigError):
        ChunkerConfig(Strategy.CLUSTER_SEMANTIC, 100)
    with pytest.raises(ConfigError):
        ChunkerConfig(Strategy.KAMRADT_MODIFIED, 100, 5)


# -- fixed -----------------------------------------------------------------

def test_fixed_examples():
    doc = words(250)
    assert [c.token_count for c in fixed_token_chunk(doc, 100, 0)] == [100, 100, 50]
    chunks = fixed_token_chunk(doc, 100, 20)
    starts = [WS.encode(doc).starts.index(c.span.start) for c in chunks]
    assert starts == [0, 80, 160, 240]
    assert [c.token_count for c in chunks] == [100, 100, 90, 10]
    assert fixed_token_chunk("", 100, 0) == []
    with pytest.raises(ConfigError):
        fixed_token_chunk(doc, 0, 0)
    with pytest.raises(ConfigError):
        fixed_token_chunk(doc, 10, 10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 400), st.integers(1, 60), st.data())
def test_fixed_properties(n, size, data):
    overlap = data.draw(st.integers(0, size - 1))
    doc = words(n)
    chunks = fixed_token_chunk(doc, size, overlap)
    check_chunks(doc, chunks, cap=size)
    # windows start at every stride; only windows cut off by the end are short
    for c in chunks:
        if c.span.end < len(doc):
            assert c.token_count == size
    ids = [list(WS.encode(c.text).ids) for c in chunks]
    toks = [c.text.split() for c in chunks]
    # consecutive full windows share exactly `overlap` tokens
    for a, b in zip(toks, toks[1:]):
        if overlap and len(b) >= overlap:
            assert a[-overlap:] == b[:overlap]
    assert sum(len(t) for t in ids) >= n
    covered = set()
    for c in chunks:
        covered.update(c.text.split())
    assert covered == set(doc.split())
    if overlap == 0:
        assert "".join(c.text for c in chunks) == doc


def test_fixed_bpe_overlap_token_ids(bpe):
    rng = random.Random(3)
    doc = random_doc(rng, 60)
    chunks = fixed_token_chunk(doc, 50, 10, tokenizer=bpe)
    check_chunks(doc, chunks, bpe, cap=50)
    all_ids = bpe.encode(doc).ids
    assert sum(c.token_count for c in chunks) >= len(all_ids)
    assert "".join(c.text for c in fixed_token_chunk(doc, 50, 0, tokenizer=bpe)) == doc


# -- recursive -------------------------------------------------------------

def test_recursive_example():
    doc = "Alpha.\n\nBeta.\n\nGamma."
    # three tokens fit a budget of five, so the document is one chunk
    assert [c.text for c in recursive_token_chunk(doc, 5)] == [doc]
    # a one-token budget forces the paragraph separator
    assert [c.text.strip() for c in recursive_token_chunk(doc, 1)] == ["Alpha.", "Beta.", "Gamma."]


def test_recursive_single_chunk_and_cap():
    doc = words(1000)
    assert [c.text for c in recursive_token_chunk(doc, 1000)] == [doc]
    chunks = recursive_token_chunk(doc, 100)
    assert max(c.token_count for c in chunks) <= 100
    assert "".join(c.text for c in chunks) == doc


def test_recursive_prefers_paragraphs():
    paras = [words(30, f"p{i}_") + "." for i in range(4)]
    doc = "\n\n".join(paras)
    chunks = recursive_token_chunk(doc, 60)
    assert [c.text.strip() for c in chunks] == ["\n\n".join(paras[:2]), "\n\n".join(paras[2:])]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 80), st.data())
def test_recursive_properties(seed, size, data):
    overlap = data.draw(st.integers(0, size - 1))
    doc = random_doc(random.Random(seed))
    chunks = recursive_token_chunk(doc, size, overlap)
    check_chunks(doc, chunks, cap=size)
    if overlap == 0:
        assert "".join(c.text for c in chunks) == doc
    else:
        for a, b in zip(chunks, chunks[1:]):
            assert a.span.start <= b.span.start and a.span.end <= b.span.end


def test_recursive_bpe_budget(bpe):
    rng = random.Random(11)
    for _ in range(20):
        doc = random_doc(rng)
        for size, overlap in [(16, 0), (64, 16), (100, 0)]:
            chunks = recursive_token_chunk(doc, size, overlap, tokenizer=bpe)
            check_chunks(doc, chunks, bpe, cap=size)
            if overlap == 0:
                assert "".join(c.text for c in chunks) == doc


# -- Kamradt ---------------------------------------------------------------

def test_split_sentences():
    doc = "One two. Three? Four!\nFive"
    assert [doc[s:e] for s, e in split_sentences(doc)] == ["One two. ", "Three? ", "Four!\n", "Five"]


def test_kamradt_identical_embeddings_single_chunk():
    sents = [words(9, f"s{i}_") + "." for i in range(3)]
    doc = " ".join(sents)

    class Same(DeterministicEmbedder):
        def _embed(self, texts):
            return np.ones((len(texts), self.dims))

    chunks = kamradt_modified_chunk(doc, Same(8), max_tokens=100)
    assert [c.text for c in chunks] == [doc]


def test_kamradt_orthogonal_pair_splits():
    doc = "a b c d e. f g h i j."
    s1, s2 = doc[:11], doc[11:]
    emb = TableEmbedder({s1: [1.0, 0.0], s2: [0.0, 1.0]}, 2)
    chunks = kamradt_modified_chunk(doc, emb, max_tokens=5, buffer=0)
    assert [c.text for c in chunks] == [s1, s2]
    assert all(c.token_count == 5 for c in chunks)
    # with one-sentence buffers both windows are the whole text (distance 0);
    # the cap still forces the split
    chunks = kamradt_modified_chunk(doc, DeterministicEmbedder(8), max_tokens=5)
    assert [c.text for c in chunks] == [s1, s2]


def test_kamradt_oversize_sentence_warns():
    doc = words(30) + ". short one."
    with pytest.warns(ChunkingWarning):
        chunks = kamradt_modified_chunk(doc, DeterministicEmbedder(16), max_tokens=10)
    check_chunks(doc, chunks, cap=10)
    assert "".join(c.text for c in chunks) == doc


def test_kamradt_is_coarsest_feasible():
    rng = random.Random(5)
    emb = DeterministicEmbedder(16)
    for _ in range(15):
        doc = random_doc(rng, 25)
        if not doc.strip():
            continue
        cap = 60
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ChunkingWarning)
            chunks = kamradt_modified_chunk(doc, emb, cap)
        check_chunks(doc, chunks, cap=cap)
        assert "".join(c.text for c in chunks) == doc


def test_kamradt_base_variant_runs():
    doc = " ".join(words(5, f"s{i}_") + "." for i in range(20))
    chunks = kamradt_semantic_chunk(doc, DeterministicEmbedder(16))
    assert "".join(c.text for c in chunks) == doc
    # 95th percentile of 19 distances leaves at most one cut above it
    assert len(chunks) <= 2


# -- cluster ---------------------------------------------------------------

def brute_force_partition(sim, fits=None):
    n = sim.shape[0]
    best = -np.inf
    for mask in range(1 << (n - 1)):
        starts = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1]
        ends = starts[1:] + [n]
        if fits and not all(j - i == 1 or fits(i, j) for i, j in zip(starts, ends)):
            continue
        best = max(best, partition_objective(sim, starts))
    return best


def test_cluster_examples():
    sim = np.array([[1.0]])
    assert optimal_partition(sim) == ([0], 0.0)
    e = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
    sim = e @ e.T
    starts, obj = optimal_partition(sim)
    # one group of all four ties at 2.0; the tie rule keeps the cut after piece 2
    assert partition_objective(sim, starts) == obj == 2.0
    assert starts == [0, 2]


def test_cluster_dp_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        e = rng.standard_normal((n, 5))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        sim = e @ e.T
        width = int(rng.integers(1, n + 1))
        fits = lambda i, j: j - i <= width  # noqa: E731
        _, obj = optimal_partition(sim, fits)
        assert obj == pytest.approx(brute_force_partition(sim, fits), abs=1e-12)


def test_cluster_chunker_budget():
    rng = random.Random(2)
    emb = DeterministicEmbedder(16)
    for _ in range(10):
        doc = random_doc(rng, 30)
        chunks = cluster_semantic_chunk(doc, emb, max_chunk_tokens=60, piece_size=15)
        check_chunks(doc, chunks, cap=60)
        assert "".join(c.text for c in chunks) == doc
    assert cluster_semantic_chunk("", emb) == []


# -- LLM -------------------------------------------------------------------

def test_parse_split_reply():
    assert parse_split_reply("split after spans: 2, 4", 1, 6) == [2, 4]
    assert parse_split_reply("split after spans 2, 4", 1, 6) == [2, 4]
    assert parse_split_reply("Split after spans: none", 1, 6) == []
    assert parse_split_reply("split after spans: 4, 2", 1, 6) is None
    assert parse_split_reply("split after spans: 9", 1, 6) is None
    assert parse_split_reply("banana", 1, 6) is None


def test_llm_scripted_split():
    doc = words(300)
    chunks = llm_semantic_chunk(doc, ScriptedLLMClient(["split after spans 2, 4"]), span_size=50)
    assert [c.token_count for c in chunks] == [100, 100, 100]
    assert "".join(c.text for c in chunks) == doc


def test_llm_no_split_and_fallback():
    doc = words(300)
    chunks = llm_semantic_chunk(doc, ScriptedLLMClient(["split after spans: none"]), span_size=50)
    assert [c.text for c in chunks] == [doc]
    client = ScriptedLLMClient(["garbage", "more garbage"])
    with pytest.warns(ChunkingWarning):
        chunks = llm_semantic_chunk(doc, client, span_size=50)
    assert len(client.prompts) == 2
    assert [c.token_count for c in chunks] == [200, 100]


def test_llm_prompt_markers():
    client = ScriptedLLMClient(["split after spans: none"])
    llm_semantic_chunk(words(120), client, span_size=50)
    user = client.prompts[0][-1]["content"]
    assert "<|start_chunk_1|>" in user and "<|end_chunk_3|>" in user


# -- estimator interface ---------------------------------------------------

def test_sklearn_interface():
    ch = RecursiveTokenChunker(chunk_size=20, overlap=5)
    assert ch.get_params()["chunk_size"] == 20
    twin = clone(ch).set_params(chunk_size=10)
    assert twin.chunk_size == 10 and ch.chunk_size == 20
    out = ch.fit_transform([words(50), ("d2", words(10))])
    assert len(out) == 2 and out[1][0].doc_id == "d2"
    assert FixedTokenChunker(10).fit().transform({"a": words(25)})[0][-1].chunk_id == "a#000002"
    with pytest.raises(ConfigError):
        FixedTokenChunker(10, 10).fit()
    with pytest.raises(ConfigError):
        ch.transform("a single string")


def test_make_chunker_all_grid_configs():
    emb = DeterministicEmbedder(16)
    doc = random_doc(random.Random(9), 30)
    for cfg in grid_configs(default_grid_spec()):
        ch = make_chunker(cfg, embedder=emb, llm_client=StrideLLMClient())
        chunks = ch.split(doc, "d")
        check_chunks(doc, chunks)


def test_chunk_to_dict():
    c = fixed_token_chunk("a b c", 2, doc_id="x")[1]
    assert c.to_dict() == {"doc_id": "x", "chunk_id": "x#000001", "start": 4, "end": 5,
                           "token_count": 1, "text": "c"}


def test_cluster_blank_piece_is_not_embedded(bpe):
    # a full 50-token piece cannot absorb the trailing tab, which stays a blank piece
    doc = " ".join(["cat"] * 47) + ". dog.\t"
    assert [c.text for c in recursive_token_chunk(doc, 50, tokenizer=bpe)][-1] == "\t"
    chunks = cluster_semantic_chunk(doc, DeterministicEmbedder(8), max_chunk_tokens=50, piece_size=50,
                                    tokenizer=bpe)
    assert "".join(c.text for c in chunks) == doc
