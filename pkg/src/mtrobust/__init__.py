"""mtrobust: noise attacks, corpus BLEU and robustness-transfer experiments
for multilingual machine translation corpora."""

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = 1

from .attack import (
    AttackConfig,
    AttackEvent,
    AttackLevel,
    NoiseOp,
    attack_sentence,
    attack_sentence_events,
    char_delete,
    char_insert,
    char_substitute,
    char_swap_adjacent,
    ops_for_level,
    select_attack_count,
    word_delete,
    word_insert,
    word_replace,
    word_swap,
)
from .bleu import (
    BleuResult,
    corpus_bleu,
    format_bleu_line,
    mark_best,
    percent_improvement,
    round_half_up,
)
from .corpus import (
    Direction,
    MultilingualDataset,
    ParallelCorpus,
    attack_lines,
    attack_test_all,
    attack_training_direction,
    collect_alphabet,
    load_dataset,
    read_corpus,
    read_lines,
    write_corpus,
    write_dataset,
    write_lines,
)
from .embeddings import EmbeddingStore, load_embeddings
from .errors import MtRobustError
from .pca import (
    DispersionStats,
    PcaResult,
    VectorRecord,
    dispersion,
    dispersion_ratio,
    fit_pca,
    read_vectors,
    write_projection,
    write_vectors,
)
from .protocol import (
    ExperimentConfig,
    ReportCell,
    Setting,
    TransferReport,
    build_test_sets,
    build_training_sets,
    load_experiment_config,
    run_protocol,
)
from .report import render_markdown, render_report, write_deltas_tsv, write_grid_csv
from .rng import line_stream_seed, make_rng
