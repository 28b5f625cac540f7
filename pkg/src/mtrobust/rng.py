"""Deterministic per-line random streams.

Each corpus line gets its own PCG64 stream whose seed mixes the global
seed, a stable 64-bit hash of the direction string ("fr-en") and the line
index through a splitmix-style finalizer. Editing one line of a corpus
therefore never changes the noise applied to any other line, and lines can
be attacked in parallel in any order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 sequence for state x."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 bytes of text."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def line_stream_seed(global_seed: int, direction_id: str, line_index: int) -> int:
    """64-bit seed for the stream of one (direction, line) pair."""
    s = splitmix64((global_seed & _MASK64) ^ fnv1a64(direction_id))
    return splitmix64(s ^ (line_index & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed & _MASK64))
