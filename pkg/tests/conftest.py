"""Shared fixtures: synthetic vocabularies, embedding files, disk datasets.

Everything is seeded, so any expected value frozen in a test stays valid.
Synthetic vocabulary words use distinct letters only; that keeps every
adjacent-swap visible (swapping two identical clusters would be a no-op).
"""

import json
import string
from pathlib import Path

import numpy as np
import pytest

from mtrobust.corpus import Direction, corpus_file_name
from mtrobust.embeddings import load_embeddings


def distinct_word(rng, min_len=3, max_len=8):
    length = int(rng.integers(min_len, max_len + 1))
    letters = list(string.ascii_lowercase)
    rng.shuffle(letters)
    return "".join(letters[:length])


def make_vocab(seed=20240301, size=60):
    rng = np.random.default_rng(seed)
    words = set()
    while len(words) < size:
        words.add(distinct_word(rng))
    return sorted(words)


def write_vec_file(path, tokens, dim=16, seed=11, header=False, extra_lines=()):
    """Plain-text embedding file with reproducible random vectors."""
    rng = np.random.default_rng(seed)
    lines = []
    if header:
        lines.append(f"{len(tokens)} {dim}")
    for token in tokens:
        vec = rng.normal(size=dim)
        lines.append(token + " " + " ".join(f"{v:.6f}" for v in vec))
    lines.extend(extra_lines)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def make_sentences(rng, vocab, n_lines, min_len=4, max_len=14):
    lines = []
    for _ in range(n_lines):
        length = int(rng.integers(min_len, max_len + 1))
        lines.append(" ".join(vocab[int(i)] for i in rng.integers(0, len(vocab), size=length)))
    return lines


def make_disk_dataset(root, directions, n_lines, vocab, seed=5, splits=("train", "test"),
                      test_lines=None):
    """Write a synthetic parallel dataset plus manifest; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for split in splits:
        count = n_lines if split != "test" else (test_lines or n_lines)
        for text in directions:
            direction = Direction.parse(text)
            src = make_sentences(rng, vocab, count)
            tgt = make_sentences(rng, vocab, count)
            (root / corpus_file_name(split, direction, "src")).write_text(
                "\n".join(src) + "\n", encoding="utf-8")
            (root / corpus_file_name(split, direction, "tgt")).write_text(
                "\n".join(tgt) + "\n", encoding="utf-8")
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({
        "data_dir": ".", "directions": list(directions), "splits": list(splits),
    }, indent=2) + "\n", encoding="utf-8")
    return manifest


@pytest.fixture(scope="session")
def vocab():
    return make_vocab()


@pytest.fixture(scope="session")
def vec_path(tmp_path_factory, vocab):
    return write_vec_file(tmp_path_factory.mktemp("emb") / "vectors.txt", vocab)


@pytest.fixture(scope="session")
def store(vec_path):
    return load_embeddings(vec_path)
