"""Extended grapheme cluster segmentation.

Character-level noise edits clusters, not code points, so combining
sequences (accented Latin, Arabic diacritics, emoji with modifiers) survive
as single units.
"""

from __future__ import annotations

import regex

_GRAPHEME = regex.compile(r"\X")


def split_graphemes(text: str) -> list[str]:
    """Split text into extended grapheme clusters, in order."""
    return _GRAPHEME.findall(text)


def grapheme_length(text: str) -> int:
    return len(split_graphemes(text))


def alphabet_from_tokens(tokens) -> tuple[str, ...]:
    """Deduplicated, sorted pool of every cluster seen across tokens.

    Sorted so the pool (and everything sampled from it) does not depend on
    iteration order of the input.
    """
    seen = set()
    for token in tokens:
        seen.update(split_graphemes(token))
    return tuple(sorted(seen))


def alphabet_from_lines(lines) -> tuple[str, ...]:
    """Cluster pool of a corpus side; whitespace separators are excluded."""
    seen = set()
    for line in lines:
        for token in line.split():
            seen.update(split_graphemes(token))
    return tuple(sorted(seen))
