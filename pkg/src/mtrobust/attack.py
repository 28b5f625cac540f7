"""Black-box noise operations on pre-tokenized sentences.

Eight operations: four edit grapheme clusters inside a token (insert,
delete, substitute, adjacent swap) and four edit whole tokens (adjacent
swap, delete, insert, replace). Token insert/replace pull candidates from
an embedding store: the replacement is sampled uniformly from the top-k
cosine neighbors of the target token.

attack_sentence is a pure function of (tokens, config, store, line seed).
All fallbacks (too-short tokens, out-of-vocabulary targets, one-token
sentences) re-route the event to a legal operation so the pipeline never
drops or empties a sentence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .graphemes import alphabet_from_tokens, split_graphemes
from .rng import make_rng


class AttackLevel(Enum):
    CHAR = "char"
    WORD = "word"
    MULTI = "multi"


class NoiseOp(Enum):
    CHAR_INSERT = "char_insert"
    CHAR_DELETE = "char_delete"
    CHAR_SUBSTITUTE = "char_substitute"
    CHAR_SWAP = "char_swap"
    WORD_SWAP = "word_swap"
    WORD_DELETE = "word_delete"
    WORD_INSERT = "word_insert"
    WORD_REPLACE = "word_replace"


CHAR_OPS = (NoiseOp.CHAR_INSERT, NoiseOp.CHAR_DELETE,
            NoiseOp.CHAR_SUBSTITUTE, NoiseOp.CHAR_SWAP)
WORD_OPS = (NoiseOp.WORD_SWAP, NoiseOp.WORD_DELETE,
            NoiseOp.WORD_INSERT, NoiseOp.WORD_REPLACE)

_LEVEL_OPS = {
    AttackLevel.CHAR: CHAR_OPS,
    AttackLevel.WORD: WORD_OPS,
    AttackLevel.MULTI: CHAR_OPS + WORD_OPS,
}


def ops_for_level(level: AttackLevel) -> tuple[NoiseOp, ...]:
    return _LEVEL_OPS[level]


@dataclass(frozen=True)
class AttackConfig:
    """Noise parameterization: level, attacked-token proportion, operation
    weights, neighbor pool size, character pool policy and the global seed.

    alphabet=None means "corpus-local": the insert/substitute pool is the
    set of grapheme clusters observed on the corpus side being attacked
    (the pipeline computes it; direct attack_sentence calls fall back to
    the sentence's own clusters). Pass an explicit string to fix the pool.
    """

    level: AttackLevel
    proportion: float = 0.1
    op_weights: Optional[dict[NoiseOp, float]] = None
    top_k: int = 10
    alphabet: Optional[str] = None
    global_seed: int = 0

    def __post_init__(self):
        if not 0 < self.proportion <= 1:
            raise ValueError(f"proportion must be in (0, 1], got {self.proportion}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be positive, got {self.top_k}")
        if self.alphabet is not None and not self.alphabet:
            raise ValueError("explicit alphabet must be non-empty")
        if self.op_weights is not None:
            allowed = set(ops_for_level(self.level))
            total = 0.0
            for op, w in self.op_weights.items():
                if w < 0:
                    raise ValueError(f"negative weight for {op.value}")
                if w > 0 and op not in allowed:
                    raise ValueError(
                        f"{op.value} has weight {w} but is outside the {self.level.value} set"
                    )
                total += w
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"op weights must sum to 1, got {total!r}")

    def resolved_weights(self) -> tuple[tuple[NoiseOp, ...], tuple[float, ...]]:
        """Level's operations with their probabilities (uniform by default)."""
        ops = ops_for_level(self.level)
        if self.op_weights is None:
            return ops, tuple(1.0 / len(ops) for _ in ops)
        weights = [self.op_weights.get(op, 0.0) for op in ops]
        total = sum(weights)  # renormalize the 1e-9 validation slack away
        return ops, tuple(w / total for w in weights)


class AttackEvent(NamedTuple):
    position: int
    drawn: NoiseOp
    applied: NoiseOp


def select_attack_count(n_tokens: int, proportion: float) -> int:
    """Events per sentence: round half up of proportion * n, clamped to [1, n].

    Rounds on the exact decimal value of the proportion; the float product
    0.3 * 5 lands a hair under 1.5 and would otherwise miscount.
    """
    if n_tokens < 1:
        raise ValueError("sentence must have at least one token")
    exact = Fraction(Decimal(repr(proportion))) * n_tokens
    count = math.floor(exact + Fraction(1, 2))
    return min(max(count, 1), n_tokens)


# ---------------------------------------------------------------------------
# character-level operations (one token in, one token out)
# ---------------------------------------------------------------------------

def char_insert(token: str, rng, alphabet: Sequence[str]) -> str:
    """Insert one pool cluster at a uniformly chosen boundary."""
    clusters = split_graphemes(token)
    pos = int(rng.integers(len(clusters) + 1))
    clusters.insert(pos, alphabet[int(rng.integers(len(alphabet)))])
    return "".join(clusters)


def char_delete(token: str, rng) -> str:
    """Remove one uniformly chosen cluster; needs at least two."""
    clusters = split_graphemes(token)
    if len(clusters) < 2:
        raise ValueError("char_delete needs a token with at least 2 clusters")
    del clusters[int(rng.integers(len(clusters)))]
    return "".join(clusters)


def char_substitute(token: str, rng, alphabet: Sequence[str]) -> str:
    """Replace one cluster with a different pool cluster.

    The position is drawn uniformly among positions that have at least one
    alternative in the pool, so exactly one cluster always changes.
    """
    clusters = split_graphemes(token)
    eligible = [i for i, c in enumerate(clusters) if any(a != c for a in alphabet)]
    if not eligible:
        raise ValueError("alphabet offers no alternative cluster for this token")
    pos = eligible[int(rng.integers(len(eligible)))]
    pool = [a for a in alphabet if a != clusters[pos]]
    clusters[pos] = pool[int(rng.integers(len(pool)))]
    return "".join(clusters)


def char_swap_adjacent(token: str, rng) -> str:
    """Transpose one uniformly chosen adjacent cluster pair."""
    clusters = split_graphemes(token)
    if len(clusters) < 2:
        raise ValueError("char_swap_adjacent needs a token with at least 2 clusters")
    i = int(rng.integers(len(clusters) - 1))
    clusters[i], clusters[i + 1] = clusters[i + 1], clusters[i]
    return "".join(clusters)


# ---------------------------------------------------------------------------
# word-level operations (token list in, token list out)
# ---------------------------------------------------------------------------

def word_swap(tokens: Sequence[str], rng, index: Optional[int] = None) -> list[str]:
    """Transpose an adjacent token pair (uniform unless index pins one side)."""
    if len(tokens) < 2:
        raise ValueError("word_swap needs at least 2 tokens")
    out = list(tokens)
    if index is None:
        i = int(rng.integers(len(out) - 1))
    else:
        i = index if index < len(out) - 1 else index - 1
    out[i], out[i + 1] = out[i + 1], out[i]
    return out


def word_delete(tokens: Sequence[str], rng, index: Optional[int] = None) -> list[str]:
    if len(tokens) < 2:
        raise ValueError("word_delete needs at least 2 tokens (never empties a sentence)")
    out = list(tokens)
    del out[int(rng.integers(len(out))) if index is None else index]
    return out


def word_insert(tokens: Sequence[str], rng, store, k: int,
                index: Optional[int] = None) -> list[str]:
    """Insert an embedding neighbor of the anchor token right after it.

    Raises OutOfVocabularyError when the anchor has no vector; the
    sentence-level driver handles the fallback.
    """
    out = list(tokens)
    anchor = int(rng.integers(len(out))) if index is None else index
    neighbor = store.sample_neighbor(out[anchor], min(k, len(store) - 1), rng)
    out.insert(anchor + 1, neighbor)
    return out


def word_replace(tokens: Sequence[str], rng, store, k: int,
                 index: Optional[int] = None) -> list[str]:
    """Replace the target token by one of its embedding neighbors."""
    out = list(tokens)
    pos = int(rng.integers(len(out))) if index is None else index
    out[pos] = store.sample_neighbor(out[pos], min(k, len(store) - 1), rng)
    return out


# ---------------------------------------------------------------------------
# sentence-level driver
# ---------------------------------------------------------------------------

def _char_op_legal(op: NoiseOp, token: str, pool: Sequence[str]) -> bool:
    if op in (NoiseOp.CHAR_DELETE, NoiseOp.CHAR_SWAP):
        return len(split_graphemes(token)) >= 2
    if op is NoiseOp.CHAR_SUBSTITUTE:
        clusters = set(split_graphemes(token))
        return any(a != c for c in clusters for a in pool)
    return True  # insert is always legal with a non-empty pool


def _redraw_legal_char_op(op: NoiseOp, token: str, pool, weights_by_op, rng) -> NoiseOp:
    """Keep the drawn char op when legal for this token, else re-draw among
    the legal ones with the configured weights renormalized."""
    if _char_op_legal(op, token, pool):
        return op
    legal = [o for o in CHAR_OPS if _char_op_legal(o, token, pool)]
    weights = [weights_by_op.get(o, 0.0) for o in legal]
    total = sum(weights)
    if total <= 0:
        weights = [1.0 / len(legal)] * len(legal)
    else:
        weights = [w / total for w in weights]
    return legal[int(rng.choice(len(legal), p=weights))]


def _redraw_vocab_position(tokens, pos, store, rng) -> Optional[int]:
    """Target position for insert/replace: the event's own position when its
    token has a vector, else up to len(tokens) re-draws of a different
    position, else None."""
    if store is None or len(store) < 2:
        return None
    if tokens[pos] in store:
        return pos
    n = len(tokens)
    for _ in range(n):
        j = int(rng.integers(n))
        if j != pos and tokens[j] in store:
            return j
    return None


def _apply_char(op: NoiseOp, token: str, pool, rng) -> str:
    if op is NoiseOp.CHAR_INSERT:
        return char_insert(token, rng, pool)
    if op is NoiseOp.CHAR_DELETE:
        return char_delete(token, rng)
    if op is NoiseOp.CHAR_SUBSTITUTE:
        return char_substitute(token, rng, pool)
    return char_swap_adjacent(token, rng)


def _apply_event(out, pos, drawn, rng, pool, store, top_k, weights_by_op) -> NoiseOp:
    op = drawn
    if op in (NoiseOp.WORD_SWAP, NoiseOp.WORD_DELETE) and len(out) < 2:
        op = NoiseOp.CHAR_SUBSTITUTE

    if op in (NoiseOp.WORD_INSERT, NoiseOp.WORD_REPLACE):
        target = _redraw_vocab_position(out, pos, store, rng)
        if target is None:
            op = NoiseOp.WORD_SWAP if len(out) >= 2 else NoiseOp.CHAR_SUBSTITUTE
        elif op is NoiseOp.WORD_INSERT:
            out[:] = word_insert(out, rng, store, top_k, index=target)
            return op
        else:
            out[:] = word_replace(out, rng, store, top_k, index=target)
            return op

    if op is NoiseOp.WORD_SWAP:
        out[:] = word_swap(out, rng, index=pos)
        return op
    if op is NoiseOp.WORD_DELETE:
        out[:] = word_delete(out, rng, index=pos)
        return op

    op = _redraw_legal_char_op(op, out[pos], pool, weights_by_op, rng)
    out[pos] = _apply_char(op, out[pos], pool, rng)
    return op


def _resolve_pool(config: AttackConfig, alphabet, tokens) -> tuple[str, ...]:
    if alphabet is not None:
        if not alphabet:
            raise ValueError("alphabet pool must be non-empty")
        return tuple(alphabet)
    if config.alphabet is not None:
        return tuple(sorted(set(split_graphemes(config.alphabet))))
    return alphabet_from_tokens(tokens)


def attack_sentence_events(tokens, config: AttackConfig, store=None, line_seed: int = 0,
                           alphabet=None) -> tuple[list[str], list[AttackEvent]]:
    """Attack one sentence and report what happened per event.

    Draws select_attack_count(n, p) target positions without replacement
    and one operation per event from the configured weights. Events apply
    right to left so structural edits (insert/delete) leave pending targets
    in place. Fully determined by (tokens, config, store, line_seed,
    alphabet); empty sentences pass through untouched.
    """
    tokens = list(tokens)
    if not tokens:
        return tokens, []
    ops, weights = config.resolved_weights()
    weights_by_op = dict(zip(ops, weights))
    needs_store = (weights_by_op.get(NoiseOp.WORD_INSERT, 0.0) > 0
                   or weights_by_op.get(NoiseOp.WORD_REPLACE, 0.0) > 0)
    if needs_store and store is None:
        raise ValueError("an embedding store is required when word insert/replace can be drawn")

    pool = _resolve_pool(config, alphabet, tokens)
    rng = make_rng(line_seed)
    count = select_attack_count(len(tokens), config.proportion)
    positions = sorted((int(p) for p in rng.choice(len(tokens), size=count, replace=False)),
                       reverse=True)
    drawn_ops = [ops[i] for i in rng.choice(len(ops), size=count, p=weights)]

    out = list(tokens)
    events = []
    for pos, drawn in zip(positions, drawn_ops):
        applied = _apply_event(out, pos, drawn, rng, pool, store, config.top_k, weights_by_op)
        events.append(AttackEvent(pos, drawn, applied))
    return out, events


def attack_sentence(tokens, config: AttackConfig, store=None, line_seed: int = 0,
                    alphabet=None) -> list[str]:
    """attack_sentence_events without the event log."""
    noisy, _ = attack_sentence_events(tokens, config, store=store, line_seed=line_seed,
                                      alphabet=alphabet)
    return noisy
