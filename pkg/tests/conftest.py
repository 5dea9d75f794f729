import os
import random
from pathlib import Path

import numpy as np
import pytest

from chunkgauge.embeddings import Embedder
from chunkgauge.tokenization import BPETokenizer, WhitespaceTokenizer

_VOCAB_CANDIDATES = [
    os.environ.get("CHUNKGAUGE_VOCAB"),
    "/usr/local/lib/python3.10/dist-packages/marimo/_lsp/copilot/cl100k_base.tiktoken",
]


def find_vocab():
    for p in _VOCAB_CANDIDATES:
        if p and Path(p).is_file():
            return p
    return None


@pytest.fixture(scope="session")
def bpe():
    path = find_vocab()
    if path is None:
        pytest.skip("cl100k_base vocabulary not available (set CHUNKGAUGE_VOCAB)")
    return BPETokenizer(path)


@pytest.fixture
def ws():
    return WhitespaceTokenizer()


WORDS = ("the cat sat on a mat while reaction yields catalyst solvent at room temperature "
         "benzene ring was oxidized quickly under acidic conditions").split()


def random_doc(rng: random.Random, n_sentences: int | None = None) -> str:
    """Prose-like text with sentences, paragraphs, odd whitespace and some non-ASCII."""
    n = rng.randint(0, 40) if n_sentences is None else n_sentences
    parts = []
    for _ in range(n):
        words = [rng.choice(WORDS) for _ in range(rng.randint(1, 25))]
        if rng.random() < 0.1:
            words.append(rng.choice(["Δ", "µmol", "α-pinene", "H₂O", "💧"]))
        parts.append(" ".join(words) + rng.choice([".", "?", "!", ";", ""]))
        parts.append(rng.choice([" ", " ", "  ", "\n", "\n\n", "\t"]))
    return "".join(parts)


class BagOfWordsEmbedder(Embedder):
    """Exact-match stub: one dimension per vocabulary word, counts as weights."""

    provider = "bow"
    model_name = "bow"

    def __init__(self, vocab):
        self.index = {w: i for i, w in enumerate(vocab)}
        self.dims = len(vocab) + 1  # last slot for unknown words

    def _embed(self, texts):
        out = np.zeros((len(texts), self.dims))
        for r, t in enumerate(texts):
            for w in t.split():
                out[r, self.index.get(w, self.dims - 1)] += 1.0
        return out


class TableEmbedder(Embedder):
    """Returns preset vectors keyed by exact text."""

    provider = "table"
    model_name = "table"

    def __init__(self, table: dict, dims: int):
        self.table = table
        self.dims = dims

    def _embed(self, texts):
        return np.stack([np.asarray(self.table[t], dtype=np.float64) for t in texts])


# criterion number -> (status, title, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {status:4} {title}" + (f" ({detail})" if detail else ""))
