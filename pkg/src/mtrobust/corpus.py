"""Parallel corpora and the attack placement rules of the two protocol phases.

Corpora are pre-tokenized plain text, UTF-8, one sentence per line, tokens
separated by single spaces. Files follow `<split>.<src>-<tgt>.<side>` with
side `src` or `tgt` (e.g. train.fr-en.src), and a JSON manifest lists the
directions and splits of a dataset.

Training phase: attack the source side of exactly one direction, leave its
target side and every other direction untouched. Testing phase: attack the
source side of every direction with the same configuration. Per-line seeds
mix in the direction string, so what one direction receives never depends
on which other directions are present.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .attack import AttackConfig, AttackEvent, attack_sentence_events
from .errors import (
    ConfigError,
    InvalidUtf8Error,
    LineCountMismatchError,
    MissingSplitError,
    UnknownDirectionError,
)
from .graphemes import alphabet_from_lines, split_graphemes
from .rng import line_stream_seed

SPLITS = ("train", "valid", "test")
SIDES = ("src", "tgt")

_LANG_CODE = re.compile(r"^[a-z]{2,3}$")


@dataclass(frozen=True, order=True)
class Direction:
    """An ordered (source language, target language) pair, e.g. fr -> en."""

    src: str
    tgt: str

    def __post_init__(self):
        for code in (self.src, self.tgt):
            if not _LANG_CODE.match(code):
                raise ValueError(f"language code must be 2-3 lowercase ASCII letters: {code!r}")
        if self.src == self.tgt:
            raise ValueError(f"source and target language must differ: {self.src}")

    def __str__(self):
        return f"{self.src}-{self.tgt}"

    @classmethod
    def parse(cls, text: str) -> "Direction":
        parts = text.split("-")
        if len(parts) != 2:
            raise ValueError(f"direction must look like 'fr-en', got {text!r}")
        return cls(parts[0], parts[1])


@dataclass
class ParallelCorpus:
    direction: Direction
    split: str
    src_lines: list[str]
    tgt_lines: list[str]

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if len(self.src_lines) != len(self.tgt_lines):
            raise LineCountMismatchError(len(self.src_lines), len(self.tgt_lines))
        if not self.src_lines:
            raise ValueError("corpus must have at least one line pair")
        for side in (self.src_lines, self.tgt_lines):
            for line in side:
                if "\n" in line or "\r" in line:
                    raise ValueError("corpus lines must not contain newline characters")

    def __len__(self):
        return len(self.src_lines)


@dataclass
class MultilingualDataset:
    """Per-(split, direction) parallel corpora."""

    corpora: dict[tuple[str, Direction], ParallelCorpus] = field(default_factory=dict)

    def add(self, corpus: ParallelCorpus):
        key = (corpus.split, corpus.direction)
        if key in self.corpora:
            raise ValueError(f"duplicate corpus for {corpus.split} {corpus.direction}")
        self.corpora[key] = corpus

    def get(self, split: str, direction: Direction) -> ParallelCorpus:
        try:
            return self.corpora[(split, direction)]
        except KeyError:
            raise MissingSplitError(f"no {split} corpus for direction {direction}") from None

    def has(self, split: str, direction: Direction) -> bool:
        return (split, direction) in self.corpora

    def directions(self, split: Optional[str] = None) -> list[Direction]:
        dirs = sorted({d for (s, d) in self.corpora if split is None or s == split})
        return dirs

    def splits(self) -> list[str]:
        present = {s for (s, _) in self.corpora}
        return [s for s in SPLITS if s in present]


# ---------------------------------------------------------------------------
# plain-text I/O
# ---------------------------------------------------------------------------

def read_lines(path) -> list[str]:
    """Read a corpus side: UTF-8 strict (errors carry the line number),
    CRLF normalized to LF, text normalized to NFC."""
    data = Path(path).read_bytes()
    raw_lines = data.split(b"\n")
    if raw_lines and raw_lines[-1] == b"":
        raw_lines.pop()
    lines = []
    for i, raw in enumerate(raw_lines):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise InvalidUtf8Error(str(path), i + 1) from None
        lines.append(unicodedata.normalize("NFC", text.rstrip("\r")))
    return lines


def write_lines(path, lines: Iterable[str]):
    """Atomic write: LF endings, trailing newline, temp file + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def corpus_file_name(split: str, direction: Direction, side: str) -> str:
    if side not in SIDES:
        raise ValueError(f"side must be 'src' or 'tgt', got {side!r}")
    return f"{split}.{direction}.{side}"


def read_corpus(src_path, tgt_path, direction: Direction, split: str) -> ParallelCorpus:
    src_lines = read_lines(src_path)
    tgt_lines = read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise LineCountMismatchError(len(src_lines), len(tgt_lines))
    return ParallelCorpus(direction, split, src_lines, tgt_lines)


def write_corpus(corpus: ParallelCorpus, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    src_path = out_dir / corpus_file_name(corpus.split, corpus.direction, "src")
    tgt_path = out_dir / corpus_file_name(corpus.split, corpus.direction, "tgt")
    write_lines(src_path, corpus.src_lines)
    write_lines(tgt_path, corpus.tgt_lines)
    return src_path, tgt_path


def load_dataset(manifest_path) -> MultilingualDataset:
    """Load every (split, direction) corpus named by a manifest.

    Manifest JSON: {"data_dir": ".", "directions": ["fr-en", ...],
    "splits": ["train", "test"]}; data_dir is relative to the manifest.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: invalid JSON: {exc}") from None
    for key in ("directions", "splits"):
        if key not in manifest or not manifest[key]:
            raise ConfigError(f"{manifest_path}: manifest needs a non-empty {key!r} list")
    data_dir = manifest_path.parent / manifest.get("data_dir", ".")
    dataset = MultilingualDataset()
    for split in manifest["splits"]:
        if split not in SPLITS:
            raise ConfigError(f"{manifest_path}: unknown split {split!r}")
        for dir_text in manifest["directions"]:
            direction = Direction.parse(dir_text)
            src = data_dir / corpus_file_name(split, direction, "src")
            tgt = data_dir / corpus_file_name(split, direction, "tgt")
            for p in (src, tgt):
                if not p.exists():
                    raise ConfigError(f"manifest names missing file: {p}")
            dataset.add(read_corpus(src, tgt, direction, split))
    return dataset


def write_dataset(dataset: MultilingualDataset, out_dir, splits=None) -> Path:
    """Write corpora (optionally of selected splits) plus a manifest.json."""
    out_dir = Path(out_dir)
    written_splits = []
    directions = set()
    for (split, direction), corpus in sorted(dataset.corpora.items(),
                                             key=lambda kv: (kv[0][0], str(kv[0][1]))):
        if splits is not None and split not in splits:
            continue
        write_corpus(corpus, out_dir)
        written_splits.append(split)
        directions.add(str(direction))
    manifest = {
        "data_dir": ".",
        "directions": sorted(directions),
        "splits": [s for s in SPLITS if s in written_splits],
    }
    manifest_path = out_dir / "manifest.json"
    write_lines(manifest_path, json.dumps(manifest, indent=2).splitlines())
    return manifest_path


# ---------------------------------------------------------------------------
# attack placement
# ---------------------------------------------------------------------------

def collect_alphabet(lines) -> tuple[str, ...]:
    """Corpus-local character pool: every grapheme cluster on this side."""
    return alphabet_from_lines(lines)


def attack_lines_events(lines, direction: Direction, config: AttackConfig, store=None,
                        alphabet=None) -> tuple[list[str], list[list[AttackEvent]]]:
    """Attack one corpus side line by line; empty lines pass through.

    The per-line stream seed mixes (global_seed, str(direction), line index).
    """
    if alphabet is None and config.alphabet is None:
        alphabet = collect_alphabet(lines)
    elif alphabet is None:
        alphabet = tuple(sorted(set(split_graphemes(config.alphabet))))
    out_lines = []
    out_events = []
    for i, line in enumerate(lines):
        tokens = line.split()
        if not tokens:
            out_lines.append(line)
            out_events.append([])
            continue
        seed = line_stream_seed(config.global_seed, str(direction), i)
        noisy, events = attack_sentence_events(tokens, config, store=store,
                                               line_seed=seed, alphabet=alphabet)
        out_lines.append(" ".join(noisy))
        out_events.append(events)
    return out_lines, out_events


def attack_lines(lines, direction: Direction, config: AttackConfig, store=None,
                 alphabet=None) -> list[str]:
    noisy, _ = attack_lines_events(lines, direction, config, store=store, alphabet=alphabet)
    return noisy


def attack_training_direction(dataset: MultilingualDataset, attacked: Direction,
                              config: AttackConfig, store=None,
                              attack_validation: bool = False) -> MultilingualDataset:
    """Training-phase placement: noise only `attacked`'s train source side.

    Every target side and every other direction is returned untouched
    (same list objects, so byte identity is trivially preserved on write).
    Validation sources stay clean unless attack_validation is set.
    """
    train_dirs = dataset.directions("train")
    if attacked not in train_dirs:
        raise UnknownDirectionError(f"{attacked} has no train corpus in this dataset")
    attacked_splits = {"train"} | ({"valid"} if attack_validation else set())
    result = MultilingualDataset()
    for (split, direction), corpus in dataset.corpora.items():
        if direction == attacked and split in attacked_splits:
            noisy = attack_lines(corpus.src_lines, direction, config, store=store)
            result.add(ParallelCorpus(direction, split, noisy, corpus.tgt_lines))
        else:
            result.add(corpus)
    return result


def attack_test_all(dataset: MultilingualDataset, config: AttackConfig,
                    store=None) -> MultilingualDataset:
    """Testing-phase placement: noise the test source side of every direction."""
    directions = dataset.directions()
    missing = [d for d in directions if not dataset.has("test", d)]
    if missing:
        raise MissingSplitError(
            "test split missing for direction(s): " + ", ".join(str(d) for d in missing)
        )
    result = MultilingualDataset()
    for (split, direction), corpus in dataset.corpora.items():
        if split == "test":
            noisy = attack_lines(corpus.src_lines, direction, config, store=store)
            result.add(ParallelCorpus(direction, split, noisy, corpus.tgt_lines))
        else:
            result.add(corpus)
    return result
