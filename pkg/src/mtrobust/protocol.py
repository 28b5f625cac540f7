"""Two-phase robustness transfer experiment runner.

Builds one training corpus per setting (clean copy plus one per noise
level, each differing from clean only in the attacked direction's train
source), builds noisy test sets for every setting (all directions
attacked), then drives an external MT system through two shell-command
hooks: one to train a model per training setting, one to translate a file
with a trained model. Every (training setting, test setting, direction)
cell is scored with corpus BLEU and compared against the clean-trained
model on the same test condition.

The external system is opaque: hooks are command templates, executed with
the shell, with {train_dir}/{model_dir} (train) and {model_dir}/{src_file}/
{out_file}/{direction} (translate) substituted. A run persists its state
after every completed cell, so a crashed or interrupted run resumes
without retraining or rescoring what already finished.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import os
import string
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .attack import AttackConfig, AttackLevel, NoiseOp
from .bleu import corpus_bleu, percent_improvement
from .corpus import (
    Direction,
    MultilingualDataset,
    corpus_file_name,
    load_dataset,
    read_lines,
    write_corpus,
    attack_test_all,
    attack_training_direction,
)
from .embeddings import DEFAULT_ROW_LIMIT, load_embeddings
from .errors import (
    ConfigError,
    HookFailureError,
    IncompleteGridError,
    MissingOutputError,
    ZeroBaselineError,
)

log = logging.getLogger(__name__)

STATE_FILE = "state.json"


class Setting(Enum):
    CLEAN = "clean"
    CHAR = "char"
    WORD = "word"
    MULTI = "multi"

    @property
    def attack_level(self) -> Optional[AttackLevel]:
        return None if self is Setting.CLEAN else AttackLevel(self.value)

    @classmethod
    def parse(cls, text: str) -> "Setting":
        try:
            return cls(text)
        except ValueError:
            raise ConfigError(
                f"unknown setting {text!r}; expected one of "
                + ", ".join(s.value for s in cls)
            ) from None


ALL_SETTINGS = (Setting.CLEAN, Setting.CHAR, Setting.WORD, Setting.MULTI)

_TRAIN_PLACEHOLDERS = {"train_dir", "model_dir"}
_TRANSLATE_PLACEHOLDERS = {"model_dir", "src_file", "out_file", "direction"}


def _template_fields(template: str) -> set[str]:
    try:
        return {name for _, name, _, _ in string.Formatter().parse(template) if name}
    except ValueError as exc:
        raise ConfigError(f"malformed command template {template!r}: {exc}") from None


def _check_template(template: str, required: set[str], allowed: set[str], label: str):
    fields = _template_fields(template)
    unknown = fields - allowed
    if unknown:
        raise ConfigError(f"{label} template uses unknown placeholder(s): {sorted(unknown)}")
    missing = required - fields
    if missing:
        raise ConfigError(f"{label} template is missing placeholder(s): {sorted(missing)}")


@dataclass
class ExperimentConfig:
    manifest: Path
    attacked_direction: Direction
    train_cmd: str
    translate_cmd: str
    output_dir: Path
    global_seed: int = 0
    settings: tuple[Setting, ...] = ALL_SETTINGS
    proportion: float = 0.1
    top_k: int = 10
    op_weights: Optional[dict[str, float]] = None
    alphabet: Optional[str] = None
    embeddings: Optional[Path] = None
    embedding_limit: int = DEFAULT_ROW_LIMIT
    lowercase_fallback: bool = False
    attack_validation: bool = False
    jobs: int = 1

    def __post_init__(self):
        if not self.settings:
            raise ConfigError("at least one setting must be requested")
        if len(set(self.settings)) != len(self.settings):
            raise ConfigError("settings list contains duplicates")
        # minimum contract: train sees the data and a model slot, translate
        # sees an input and an output; {direction} and the rest are allowed
        # wherever the hook wants them (an identity stub needs neither).
        _check_template(self.train_cmd, {"train_dir", "model_dir"},
                        _TRAIN_PLACEHOLDERS, "train")
        _check_template(self.translate_cmd, {"src_file", "out_file"},
                        _TRANSLATE_PLACEHOLDERS, "translate")
        if self.needs_embeddings() and self.embeddings is None:
            raise ConfigError("word/multi settings need an 'embeddings' path")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def needs_embeddings(self) -> bool:
        return any(s in (Setting.WORD, Setting.MULTI) for s in self.settings)

    def attack_config(self, setting: Setting) -> AttackConfig:
        level = setting.attack_level
        if level is None:
            raise ValueError("the clean setting has no attack configuration")
        weights = None
        if self.op_weights is not None:
            weights = {NoiseOp(name): w for name, w in self.op_weights.items()}
        return AttackConfig(level=level, proportion=self.proportion, op_weights=weights,
                            top_k=self.top_k, alphabet=self.alphabet,
                            global_seed=self.global_seed)

    def as_dict(self) -> dict:
        return {
            "manifest": str(self.manifest),
            "attacked_direction": str(self.attacked_direction),
            "train_cmd": self.train_cmd,
            "translate_cmd": self.translate_cmd,
            "output_dir": str(self.output_dir),
            "global_seed": self.global_seed,
            "settings": [s.value for s in self.settings],
            "proportion": self.proportion,
            "top_k": self.top_k,
            "op_weights": self.op_weights,
            "alphabet": self.alphabet,
            "embeddings": None if self.embeddings is None else str(self.embeddings),
            "embedding_limit": self.embedding_limit,
            "lowercase_fallback": self.lowercase_fallback,
            "attack_validation": self.attack_validation,
            "jobs": self.jobs,
        }


def load_experiment_config(path) -> ExperimentConfig:
    """Read the JSON experiment description; paths resolve relative to it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    known = {
        "manifest", "attacked_direction", "train_cmd", "translate_cmd", "output_dir",
        "global_seed", "settings", "proportion", "top_k", "op_weights", "alphabet",
        "embeddings", "embedding_limit", "lowercase_fallback", "attack_validation", "jobs",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config key(s): {sorted(unknown)}")
    missing = {"manifest", "attacked_direction", "train_cmd", "translate_cmd",
               "output_dir"} - set(raw)
    if missing:
        raise ConfigError(f"{path}: missing config key(s): {sorted(missing)}")
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    settings = tuple(Setting.parse(s) for s in raw.get("settings", [s.value for s in ALL_SETTINGS]))
    return ExperimentConfig(
        manifest=resolve(raw["manifest"]),
        attacked_direction=Direction.parse(raw["attacked_direction"]),
        train_cmd=raw["train_cmd"],
        translate_cmd=raw["translate_cmd"],
        output_dir=resolve(raw["output_dir"]),
        global_seed=int(raw.get("global_seed", 0)),
        settings=settings,
        proportion=float(raw.get("proportion", 0.1)),
        top_k=int(raw.get("top_k", 10)),
        op_weights=raw.get("op_weights"),
        alphabet=raw.get("alphabet"),
        embeddings=resolve(raw["embeddings"]) if raw.get("embeddings") else None,
        embedding_limit=int(raw.get("embedding_limit", DEFAULT_ROW_LIMIT)),
        lowercase_fallback=bool(raw.get("lowercase_fallback", False)),
        attack_validation=bool(raw.get("attack_validation", False)),
        jobs=int(raw.get("jobs", 1)),
    )


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportCell:
    bleu: float
    delta_pct: Optional[float]  # vs the clean-trained model, same test condition


@dataclass
class TransferReport:
    attacked_direction: Direction
    settings: list[Setting]
    directions: list[Direction]
    cells: dict[tuple[Setting, Setting, Direction], ReportCell]
    metadata: dict = field(default_factory=dict)

    def cell(self, train: Setting, test: Setting, direction: Direction) -> ReportCell:
        return self.cells[(train, test, direction)]

    def require_complete(self):
        missing = [
            (tr.value, te.value, str(d))
            for tr in self.settings for te in self.settings for d in self.directions
            if (tr, te, d) not in self.cells
        ]
        if missing:
            raise IncompleteGridError(f"grid is missing {len(missing)} cell(s), e.g. {missing[:3]}")


# ---------------------------------------------------------------------------
# run state
# ---------------------------------------------------------------------------

def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunState:
    """Resume bookkeeping, persisted atomically after every step."""

    def __init__(self, path: Path, data: dict):
        self.path = Path(path)
        self.data = data

    @classmethod
    def load_or_create(cls, path, dataset_id: str, global_seed: int) -> "RunState":
        path = Path(path)
        if path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            if data.get("dataset_id") != dataset_id or data.get("global_seed") != global_seed:
                raise ConfigError(
                    f"{path}: existing run state belongs to a different dataset or seed; "
                    "use a fresh output directory"
                )
            return cls(path, data)
        data = {
            "version": 1,
            "dataset_id": dataset_id,
            "global_seed": global_seed,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "builds": {},
            "training": {},
            "cells": {},
        }
        state = cls(path, data)
        state.save()
        return state

    def save(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
        os.replace(tmp, self.path)


def _dataset_id(manifest_path: Path, dataset: MultilingualDataset) -> str:
    digest = hashlib.sha256()
    for (split, direction), corpus in sorted(dataset.corpora.items(),
                                             key=lambda kv: (kv[0][0], str(kv[0][1]))):
        digest.update(f"{split}|{direction}|{len(corpus)}".encode())
        for line in corpus.src_lines:
            digest.update(line.encode("utf-8") + b"\n")
        for line in corpus.tgt_lines:
            digest.update(line.encode("utf-8") + b"\n")
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# corpus builds
# ---------------------------------------------------------------------------

def _write_split(dataset: MultilingualDataset, split: str, out_dir: Path):
    for direction in dataset.directions(split):
        write_corpus(dataset.get(split, direction), out_dir)


def build_training_sets(cfg: ExperimentConfig, dataset: MultilingualDataset,
                        store=None) -> dict[Setting, Path]:
    """One training directory per setting under <output_dir>/train_sets/.

    The clean directory is a straight copy of the loaded corpus; each attack
    directory differs from it only in the attacked direction's train source
    (and valid source when attack_validation is on).
    """
    out: dict[Setting, Path] = {}
    splits = [s for s in ("train", "valid") if s in dataset.splits()]
    for setting in cfg.settings:
        target = cfg.output_dir / "train_sets" / setting.value
        if setting is Setting.CLEAN:
            built = dataset
        else:
            built = attack_training_direction(
                dataset, cfg.attacked_direction, cfg.attack_config(setting),
                store=store, attack_validation=cfg.attack_validation,
            )
        for split in splits:
            _write_split(built, split, target)
        out[setting] = target
    return out


def build_test_sets(cfg: ExperimentConfig, dataset: MultilingualDataset,
                    store=None) -> dict[Setting, Path]:
    """One test directory per setting; non-clean settings attack every
    direction's source side, references stay untouched everywhere."""
    out: dict[Setting, Path] = {}
    for setting in cfg.settings:
        target = cfg.output_dir / "test_sets" / setting.value
        if setting is Setting.CLEAN:
            built = dataset
        else:
            built = attack_test_all(dataset, cfg.attack_config(setting), store=store)
        _write_split(built, "test", target)
        out[setting] = target
    return out


# ---------------------------------------------------------------------------
# hooks
# ---------------------------------------------------------------------------

def _run_hook(template: str, substitutions: dict[str, str]):
    command = template.format(**{k: str(v) for k, v in substitutions.items()})
    log.info("hook: %s", command)
    proc = subprocess.run(command, shell=True, capture_output=True, text=True)
    if proc.returncode != 0:
        raise HookFailureError(command, proc.returncode, proc.stderr)
    return command


# ---------------------------------------------------------------------------
# the protocol itself
# ---------------------------------------------------------------------------

def run_protocol(cfg: ExperimentConfig) -> TransferReport:
    """Execute both phases end to end and return the filled grid.

    Training hooks run sequentially (one per training setting); each
    (training setting, test setting, direction) cell then translates the
    noisy test source and scores it against the clean reference. Completed
    work is recorded in state.json and skipped on re-runs as long as the
    produced files still match their recorded hashes.
    """
    dataset = load_dataset(cfg.manifest)
    directions = dataset.directions("test")
    if not directions:
        raise ConfigError("dataset has no test split; the protocol cannot score anything")
    if cfg.attacked_direction not in dataset.directions("train"):
        raise ConfigError(f"attacked direction {cfg.attacked_direction} has no train corpus")

    store = None
    if cfg.needs_embeddings():
        store = load_embeddings(cfg.embeddings, limit=cfg.embedding_limit,
                                lowercase_fallback=cfg.lowercase_fallback)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    state = RunState.load_or_create(cfg.output_dir / STATE_FILE,
                                    _dataset_id(cfg.manifest, dataset), cfg.global_seed)

    # corpus builds (deterministic; skipped once recorded)
    if not state.data["builds"].get("train_sets"):
        train_dirs = build_training_sets(cfg, dataset, store=store)
        state.data["builds"]["train_sets"] = {s.value: str(p) for s, p in train_dirs.items()}
        state.save()
    else:
        train_dirs = {Setting.parse(s): Path(p)
                      for s, p in state.data["builds"]["train_sets"].items()}
    if not state.data["builds"].get("test_sets"):
        test_dirs = build_test_sets(cfg, dataset, store=store)
        state.data["builds"]["test_sets"] = {s.value: str(p) for s, p in test_dirs.items()}
        state.save()
    else:
        test_dirs = {Setting.parse(s): Path(p)
                     for s, p in state.data["builds"]["test_sets"].items()}

    # phase 1: one training run per setting, sequential
    model_dirs: dict[Setting, Path] = {}
    for setting in cfg.settings:
        model_dir = cfg.output_dir / "models" / setting.value
        model_dirs[setting] = model_dir
        record = state.data["training"].get(setting.value)
        if record and record.get("completed") and Path(record["model_dir"]).exists():
            continue
        model_dir.mkdir(parents=True, exist_ok=True)
        command = _run_hook(cfg.train_cmd,
                            {"train_dir": train_dirs[setting], "model_dir": model_dir})
        state.data["training"][setting.value] = {
            "completed": True, "model_dir": str(model_dir), "command": command,
        }
        state.save()

    # phase 2: translate + score each grid cell; cells of one trained model
    # may run concurrently (hooks are subprocesses), training never does
    lock = threading.Lock()
    for train_setting in cfg.settings:
        cells = [(test_setting, direction)
                 for test_setting in cfg.settings for direction in directions]
        if cfg.jobs == 1:
            for test_setting, direction in cells:
                _ensure_cell(cfg, state, train_setting, test_setting, direction,
                             model_dirs[train_setting], test_dirs[test_setting], lock)
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                futures = [
                    pool.submit(_ensure_cell, cfg, state, train_setting, test_setting,
                                direction, model_dirs[train_setting],
                                test_dirs[test_setting], lock)
                    for test_setting, direction in cells
                ]
                for future in futures:
                    future.result()

    return _assemble_report(cfg, state, directions)


def _cell_key(train: Setting, test: Setting, direction: Direction) -> str:
    return f"{train.value}|{test.value}|{direction}"


def _ensure_cell(cfg: ExperimentConfig, state: RunState, train: Setting, test: Setting,
                 direction: Direction, model_dir: Path, test_dir: Path,
                 lock: threading.Lock):
    key = _cell_key(train, test, direction)
    hyp_path = cfg.output_dir / "hyps" / train.value / f"{test.value}.{direction}.hyp"
    with lock:
        record = state.data["cells"].get(key)
    if record and hyp_path.exists() and sha256_file(hyp_path) == record["hyp_sha256"]:
        return
    src_path = test_dir / corpus_file_name("test", direction, "src")
    ref_path = test_dir / corpus_file_name("test", direction, "tgt")
    hyp_path.parent.mkdir(parents=True, exist_ok=True)
    _run_hook(cfg.translate_cmd, {
        "model_dir": model_dir, "src_file": src_path,
        "out_file": hyp_path, "direction": direction,
    })
    if not hyp_path.exists():
        raise MissingOutputError(f"translate hook produced no file at {hyp_path}")
    hyp_lines = read_lines(hyp_path)
    ref_lines = read_lines(ref_path)
    result = corpus_bleu(hyp_lines, ref_lines)
    cell = {
        "train_setting": train.value,
        "test_setting": test.value,
        "direction": str(direction),
        "bleu": result.score,
        "precisions": [[p.numerator, p.denominator] for p in result.precisions],
        "brevity_penalty": result.brevity_penalty,
        "hyp_len": result.hyp_len,
        "ref_len": result.ref_len,
        "hyp_file": str(hyp_path),
        "ref_file": str(ref_path),
        "hyp_sha256": sha256_file(hyp_path),
        "ref_sha256": sha256_file(ref_path),
    }
    with lock:
        state.data["cells"][key] = cell
        state.save()


def _assemble_report(cfg: ExperimentConfig, state: RunState,
                     directions: list[Direction]) -> TransferReport:
    cells: dict[tuple[Setting, Setting, Direction], ReportCell] = {}
    raw = state.data["cells"]
    for train in cfg.settings:
        for test in cfg.settings:
            for direction in directions:
                record = raw.get(_cell_key(train, test, direction))
                if record is None:
                    continue
                delta = None
                if train is Setting.CLEAN:
                    delta = 0.0  # the clean-trained row is its own baseline
                elif Setting.CLEAN in cfg.settings:
                    baseline = raw.get(_cell_key(Setting.CLEAN, test, direction))
                    if baseline is not None:
                        try:
                            delta = percent_improvement(record["bleu"], baseline["bleu"])
                        except ZeroBaselineError:
                            delta = None
                cells[(train, test, direction)] = ReportCell(record["bleu"], delta)
    report = TransferReport(
        attacked_direction=cfg.attacked_direction,
        settings=list(cfg.settings),
        directions=list(directions),
        cells=cells,
        metadata={
            "global_seed": cfg.global_seed,
            "dataset_id": state.data["dataset_id"],
            "created": state.data["created"],
            "manifest": str(cfg.manifest),
        },
    )
    report.require_complete()
    return report
