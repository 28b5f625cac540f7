import numpy as np
import pytest

from mtrobust.embeddings import EmbeddingStore, load_embeddings
from mtrobust.errors import DimensionMismatchError, EmptyFileError, OutOfVocabularyError
from mtrobust.rng import make_rng

from conftest import write_vec_file


def test_load_glove_style(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("a 1 0\nb 0.9 0.1\nc 0 1\n", encoding="utf-8")
    store = load_embeddings(path)
    assert len(store) == 3
    assert store.dim == 2
    assert store.format == "glove"
    # rows are unit-normalized
    norms = np.linalg.norm(store.matrix.astype(np.float64), axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)


def test_load_fasttext_header_and_limit(tmp_path):
    path = write_vec_file(tmp_path / "v.vec", [f"w{i}" for i in range(40)], dim=8, header=True)
    store = load_embeddings(path, limit=25)
    assert store.format == "fasttext"
    assert len(store) == 25
    assert store.dim == 8


def test_duplicate_token_keeps_first(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("a 1 0\nb 0 1\na 0.5 0.5\n", encoding="utf-8")
    store = load_embeddings(path)
    assert len(store) == 2
    assert store.duplicates_skipped == 1
    assert float(np.dot(store.vector("a"), np.array([1, 0], dtype=np.float32))) > 0.999


def test_zero_vector_dropped_not_fatal(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("a 1 0\nz 0 0\nb 0 1\n", encoding="utf-8")
    store = load_embeddings(path)
    assert len(store) == 2
    assert store.zero_vectors_dropped == 1
    assert "z" not in store


def test_malformed_line_counted_and_skipped(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("a 1 0\nbroken x y\nb 0 1\n", encoding="utf-8")
    store = load_embeddings(path)
    assert len(store) == 2
    assert store.malformed_lines == 1


def test_dimension_mismatch_is_fatal(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("a 1 0\nb 0 1 2\n", encoding="utf-8")
    with pytest.raises(DimensionMismatchError):
        load_embeddings(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("", encoding="utf-8")
    with pytest.raises(EmptyFileError):
        load_embeddings(path)


def test_load_idempotent(tmp_path, vocab):
    path = write_vec_file(tmp_path / "v.txt", vocab, dim=12, seed=3)
    first = load_embeddings(path)
    second = load_embeddings(path)
    assert first.tokens == second.tokens
    assert np.array_equal(first.matrix, second.matrix)


def test_topk_small_fixture():
    matrix = np.array([[1, 0], [0.9, 0.1], [0, 1]], dtype=np.float64)
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    store = EmbeddingStore(["a", "b", "c"], matrix)
    top = store.topk_similar("a", 1)
    assert top[0][0] == "b"
    assert abs(top[0][1] - 0.9 / np.sqrt(0.82)) < 1e-6  # = 0.99388...


def test_topk_exhaustive_returns_everything(store):
    token = store.tokens[0]
    everyone = store.topk_similar(token, len(store) - 1)
    assert len(everyone) == len(store) - 1
    assert token not in [t for t, _ in everyone]
    scores = [s for _, s in everyone]
    assert scores == sorted(scores, reverse=True)


def test_topk_rejects_bad_k(store):
    with pytest.raises(ValueError):
        store.topk_similar(store.tokens[0], 0)
    with pytest.raises(ValueError):
        store.topk_similar(store.tokens[0], len(store))


def test_topk_out_of_vocabulary(store):
    with pytest.raises(OutOfVocabularyError):
        store.topk_similar("no-such-token", 3)


def test_topk_matches_bruteforce_with_ties(tmp_path):
    rng = np.random.default_rng(77)
    tokens = [f"t{i:03d}" for i in range(200)]
    vectors = rng.normal(size=(200, 16))
    vectors[50] = vectors[10]  # exact duplicates create genuine ties
    vectors[120] = vectors[10]
    lines = [t + " " + " ".join(f"{v:.8f}" for v in row) for t, row in zip(tokens, vectors)]
    path = tmp_path / "v.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    store = load_embeddings(path)

    for q in range(0, 200, 4):
        query = store.matrix[q]
        scores = [float(np.dot(store.matrix[j], query)) for j in range(len(store))]
        expected = [store.tokens[j] for j in
                    sorted((j for j in range(len(store)) if j != q),
                           key=lambda j: (-scores[j], j))[:10]]
        got = [t for t, _ in store.topk_similar(store.tokens[q], 10)]
        assert got == expected


def test_tie_order_is_row_index():
    base = np.array([[1, 0], [0, 1], [0, 1], [0, 1]], dtype=np.float64)
    store = EmbeddingStore(["q", "n1", "n2", "n3"], base)
    names = [t for t, _ in store.topk_similar("q", 3)]
    assert names == ["n1", "n2", "n3"]


def test_sample_neighbor_k1_deterministic(store):
    token = store.tokens[4]
    nearest = store.topk_similar(token, 1)[0][0]
    for seed in range(20):
        assert store.sample_neighbor(token, 1, make_rng(seed)) == nearest


def test_sample_neighbor_never_returns_query(store):
    token = store.tokens[8]
    rng = make_rng(5)
    for _ in range(2000):
        assert store.sample_neighbor(token, 10, rng) != token


def test_sample_neighbor_uniform(store):
    token = store.tokens[2]
    k = 5
    neighbors = [t for t, _ in store.topk_similar(token, k)]
    rng = make_rng(123)
    counts = {t: 0 for t in neighbors}
    draws = 10_000
    for _ in range(draws):
        counts[store.sample_neighbor(token, k, rng)] += 1
    for t in neighbors:
        assert abs(counts[t] / draws - 1.0 / k) < 0.02


def test_lowercase_fallback(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("hello 1 0\nworld 0 1\n", encoding="utf-8")
    strict = load_embeddings(path)
    assert "Hello" not in strict
    relaxed = load_embeddings(path, lowercase_fallback=True)
    assert "Hello" in relaxed
    assert relaxed.topk_similar("Hello", 1)[0][0] == "world"


def test_stored_dot_matches_full_cosine_formula(store):
    rng = np.random.default_rng(11)
    m = store.matrix.astype(np.float64)
    for _ in range(200):
        i, j = rng.integers(0, len(store), size=2)
        dot = float(store.matrix[i] @ store.matrix[j])
        full = float(m[i] @ m[j] / (np.linalg.norm(m[i]) * np.linalg.norm(m[j])))
        assert abs(dot - full) < 1e-6
