"""Word vector store with exact cosine top-k queries.

Loads the two common plain-text formats: GloVe (no header) and fastText
.vec (first line "count dim"). Vectors are unit-normalized at load so
cosine similarity is a plain dot product. Top-k is exact brute force; the
corpora this toolkit targets need thousands of queries, not millions, and
exactness keeps the neighbor sampling testable.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import DimensionMismatchError, EmptyFileError, OutOfVocabularyError

log = logging.getLogger(__name__)

DEFAULT_ROW_LIMIT = 200_000


class EmbeddingStore:
    """Immutable vocabulary + unit-normalized matrix; safe to share across threads."""

    def __init__(self, tokens, matrix, source="<memory>", fmt="glove",
                 lowercase_fallback=False, malformed_lines=0, duplicates_skipped=0,
                 zero_vectors_dropped=0):
        if len(tokens) != matrix.shape[0]:
            raise ValueError("token list and matrix row count differ")
        if len(tokens) == 0:
            raise EmptyFileError(f"{source}: no usable vectors")
        self.tokens = list(tokens)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.source = source
        self.format = fmt
        self.lowercase_fallback = lowercase_fallback
        self.malformed_lines = malformed_lines
        self.duplicates_skipped = duplicates_skipped
        self.zero_vectors_dropped = zero_vectors_dropped
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return self._row_or_none(token) is not None

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def _row_or_none(self, token):
        row = self._index.get(token)
        if row is None and self.lowercase_fallback:
            row = self._index.get(token.lower())
        return row

    def row(self, token) -> int:
        row = self._row_or_none(token)
        if row is None:
            raise OutOfVocabularyError(token)
        return row

    def vector(self, token) -> np.ndarray:
        return self.matrix[self.row(token)]

    def topk_similar(self, token, k) -> list[tuple[str, float]]:
        """The k most cosine-similar tokens, excluding the query itself.

        Ordered by cosine descending; exact ties resolve by ascending row
        index so results are reproducible across runs.
        """
        if not 1 <= k < len(self):
            raise ValueError(f"k must be in [1, {len(self) - 1}], got {k}")
        row = self.row(token)
        scores = self.matrix @ self.matrix[row]
        scores[row] = -np.inf
        order = np.argsort(-scores, kind="stable")[:k]
        return [(self.tokens[i], float(scores[i])) for i in order]

    def sample_neighbor(self, token, k, rng) -> str:
        """Uniform draw from the top-k neighbors of token (never token itself)."""
        neighbors = self.topk_similar(token, k)
        return neighbors[int(rng.integers(len(neighbors)))][0]


def _detect_header(first_line: str):
    parts = first_line.split()
    if len(parts) == 2:
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            return None
    return None


def load_embeddings(path, limit=DEFAULT_ROW_LIMIT, lowercase_fallback=False) -> EmbeddingStore:
    """Load a GloVe or fastText text file into an EmbeddingStore.

    Keeps the first occurrence of a duplicate token, drops zero vectors,
    skips lines whose numeric fields fail to parse (all three are counted
    and logged, not fatal). A line whose vector length disagrees with the
    established dimension raises DimensionMismatchError.
    """
    path = str(path)
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    index: set[str] = set()
    dim = None
    fmt = "glove"
    malformed = duplicates = zeros = 0

    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise EmptyFileError(f"{path}: empty file")
        header = _detect_header(first)
        if header is not None:
            fmt = "fasttext"
            dim = header[1]
            start_line = 2
            pending = None
        else:
            start_line = 1
            pending = first

        def handle(line, line_no):
            nonlocal dim, malformed, duplicates, zeros
            parts = line.split()
            if not parts:
                return True
            if len(tokens) >= (limit or float("inf")):
                return False
            token, fields = parts[0], parts[1:]
            if dim is None:
                dim = len(fields)
                if dim == 0:
                    raise DimensionMismatchError(f"{path}:{line_no}: no vector fields")
            if len(fields) != dim:
                raise DimensionMismatchError(
                    f"{path}:{line_no}: expected {dim} values, found {len(fields)}"
                )
            try:
                vec = np.array([float(v) for v in fields], dtype=np.float64)
            except ValueError:
                malformed += 1
                return True
            if token in index:
                duplicates += 1
                return True
            norm = np.linalg.norm(vec)
            if norm < 1e-12:
                zeros += 1
                return True
            tokens.append(token)
            rows.append(vec / norm)
            index.add(token)
            return True

        if pending is not None and not handle(pending, 1):
            pass
        else:
            for offset, line in enumerate(fh):
                if not handle(line, start_line + offset):
                    break

    if not tokens:
        raise EmptyFileError(f"{path}: no usable vectors")
    if malformed or duplicates or zeros:
        log.warning(
            "%s: skipped %d malformed line(s), %d duplicate token(s), %d zero vector(s)",
            path, malformed, duplicates, zeros,
        )
    matrix = np.vstack(rows).astype(np.float32)
    return EmbeddingStore(
        tokens, matrix, source=path, fmt=fmt, lowercase_fallback=lowercase_fallback,
        malformed_lines=malformed, duplicates_skipped=duplicates, zero_vectors_dropped=zeros,
    )
