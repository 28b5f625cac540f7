"""Single command-line entry point.

Subcommands: attack, neighbors, bleu, pca, dispersion, protocol. stdout is
machine-parseable, diagnostics go to stderr, every run logs its resolved
configuration (defaults included) to stderr and next to its outputs.
Outputs are written atomically (temp file + rename). Exit codes: 0 on
success, 1 on a domain error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from collections import Counter
from pathlib import Path

from . import __version__, CONFIG_SCHEMA_VERSION
from .attack import AttackConfig, AttackLevel, NoiseOp, ops_for_level
from .corpus import collect_alphabet, read_lines, write_lines
from .embeddings import DEFAULT_ROW_LIMIT, load_embeddings
from .errors import MtRobustError
from .pca import (
    dispersion,
    fit_pca,
    format_dispersion_block,
    read_vectors,
    split_seeds,
    write_projection,
)
from .bleu import corpus_bleu, format_bleu_line
from .protocol import load_experiment_config, run_protocol
from .report import render_markdown, write_deltas_tsv, write_grid_csv

log = logging.getLogger("mtrobust")

# shared worker state for forked attack workers (set before the pool starts)
_POOL_STATE: dict = {}


def _log_effective_config(command: str, effective: dict, meta_path=None):
    payload = {"command": command, "version": __version__, "config": effective}
    log.info("effective config: %s", json.dumps(payload, sort_keys=True))
    if meta_path is not None:
        meta = Path(meta_path)
        meta.parent.mkdir(parents=True, exist_ok=True)
        meta.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _attack_chunk(task):
    start, lines = task
    config = _POOL_STATE["config"]
    store = _POOL_STATE["store"]
    alphabet = _POOL_STATE["alphabet"]
    direction = _POOL_STATE["direction"]
    from .attack import attack_sentence_events
    from .rng import line_stream_seed

    out = []
    counts: Counter = Counter()
    events_total = 0
    for offset, line in enumerate(lines):
        tokens = line.split()
        if not tokens:
            out.append(line)
            continue
        seed = line_stream_seed(config.global_seed, direction, start + offset)
        noisy, events = attack_sentence_events(tokens, config, store=store,
                                               line_seed=seed, alphabet=alphabet)
        out.append(" ".join(noisy))
        events_total += len(events)
        counts.update(ev.applied for ev in events)
    return start, out, events_total, counts


def _cmd_attack(args) -> int:
    level = AttackLevel(args.level)
    if level in (AttackLevel.WORD, AttackLevel.MULTI) and not args.embeddings:
        args.parser.error(f"--embeddings is required for --level {args.level}")
    try:
        config = AttackConfig(level=level, proportion=args.proportion, top_k=args.top_k,
                              alphabet=args.alphabet, global_seed=args.seed)
    except ValueError as exc:
        args.parser.error(str(exc))
    effective = {
        "input": str(args.input), "output": str(args.output), "level": level.value,
        "proportion": args.proportion, "top_k": args.top_k, "seed": args.seed,
        "alphabet": args.alphabet, "embeddings": args.embeddings,
        "direction": args.direction, "jobs": args.jobs,
    }
    _log_effective_config("attack", effective, str(args.output) + ".meta.json")

    store = None
    if args.embeddings:
        store = load_embeddings(args.embeddings, lowercase_fallback=args.lowercase_fallback)
    lines = read_lines(args.input)
    alphabet = None
    if config.alphabet is None:
        alphabet = collect_alphabet(lines)

    _POOL_STATE.update(config=config, store=store, alphabet=alphabet,
                       direction=args.direction)
    chunk = 1024
    tasks = [(start, lines[start:start + chunk]) for start in range(0, len(lines), chunk)]
    results = []
    if args.jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_attack_chunk, tasks))
    else:
        results = [_attack_chunk(t) for t in tasks]

    out_lines: list[str] = []
    histogram: Counter = Counter()
    events_total = 0
    for _, chunk_lines, chunk_events, chunk_counts in sorted(results):
        out_lines.extend(chunk_lines)
        events_total += chunk_events
        histogram.update(chunk_counts)

    write_lines(args.output, out_lines)
    parts = [f"sentences={len(out_lines)}", f"events={events_total}"]
    for op in NoiseOp:
        if histogram.get(op):
            parts.append(f"{op.value}={histogram[op]}")
    print(" ".join(parts))
    return 0


def _cmd_neighbors(args) -> int:
    _log_effective_config("neighbors", {
        "embeddings": str(args.embeddings), "token": args.token, "k": args.k,
        "limit": args.limit, "lowercase_fallback": args.lowercase_fallback,
    })
    store = load_embeddings(args.embeddings, limit=args.limit,
                            lowercase_fallback=args.lowercase_fallback)
    for rank, (token, cosine) in enumerate(store.topk_similar(args.token, args.k), start=1):
        print(f"{rank}\t{token}\t{cosine:.6f}")
    return 0


def _cmd_bleu(args) -> int:
    _log_effective_config("bleu", {
        "hyp": str(args.hyp), "ref": str(args.ref), "smooth": args.smooth,
    })
    result = corpus_bleu(read_lines(args.hyp), read_lines(args.ref),
                         smooth_add_one=args.smooth)
    print(format_bleu_line(result))
    return 0


def _cmd_pca(args) -> int:
    _log_effective_config("pca", {"vectors": str(args.vectors), "out": str(args.out)},
                          str(args.out) + ".meta.json")
    result = fit_pca(read_vectors(args.vectors))
    write_projection(result, args.out)
    print(f"records={len(result.labels)} "
          f"lambda1={result.eigenvalues[0]:.6g} lambda2={result.eigenvalues[1]:.6g}")
    return 0


def _cmd_dispersion(args) -> int:
    _log_effective_config("dispersion", {
        "vectors": str(args.vectors), "seeds": args.seeds, "compare": args.compare,
    })
    records = read_vectors(args.vectors)
    if args.seeds:
        noisy = [r for r in records if r.variant != "seed"]
        seeds = read_vectors(args.seeds)
    else:
        noisy, seeds = split_seeds(records)
    stats = dispersion(noisy, seeds)
    compare_stats = None
    if args.compare:
        other_noisy, other_seeds = split_seeds(read_vectors(args.compare))
        compare_stats = dispersion(other_noisy, other_seeds)
    print(format_dispersion_block(stats, compare_stats))
    return 0


def _cmd_protocol_run(args) -> int:
    cfg = load_experiment_config(args.config)
    _log_effective_config("protocol run", cfg.as_dict(),
                          cfg.output_dir / "effective_config.json")
    report = run_protocol(cfg)
    report_path = cfg.output_dir / "report.md"
    write_lines(report_path, render_markdown(report).splitlines())
    write_grid_csv(report, cfg.output_dir / "grid.csv")
    write_deltas_tsv(report, cfg.output_dir / "deltas.tsv")
    cells = len(report.settings) ** 2 * len(report.directions)
    print(f"grid complete: {cells} cells -> {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtrobust",
        description="Noise attacks, corpus BLEU and robustness-transfer experiments "
                    "for multilingual MT corpora.",
    )
    parser.add_argument("--version", action="version",
                        version=f"mtrobust {__version__} (config schema {CONFIG_SCHEMA_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="write a noised copy of a pre-tokenized corpus side")
    p.add_argument("-i", "--input", required=True, help="clean corpus side, one sentence per line")
    p.add_argument("-o", "--output", required=True, help="where to write the noisy copy")
    p.add_argument("--level", required=True, choices=[l.value for l in AttackLevel])
    p.add_argument("--proportion", type=float, default=0.1,
                   help="fraction of tokens attacked per sentence (default 0.1)")
    p.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    p.add_argument("--direction", default="",
                   help="direction id mixed into per-line seeds (e.g. fr-en)")
    p.add_argument("--embeddings", help="word vectors, required for word/multi level")
    p.add_argument("--top-k", type=int, default=10, dest="top_k",
                   help="neighbor pool size for word insert/replace (default 10)")
    p.add_argument("--alphabet", help="explicit character pool (default: clusters of the input)")
    p.add_argument("--lowercase-fallback", action="store_true",
                   help="fall back to lowercased lookups for uncased embeddings")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel workers (default: available cores)")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("neighbors", help="print the cosine top-k neighbors of a token")
    p.add_argument("embeddings", help="GloVe or fastText text file")
    p.add_argument("token")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--limit", type=int, default=DEFAULT_ROW_LIMIT,
                   help="maximum vocabulary rows to load (default 200000)")
    p.add_argument("--lowercase-fallback", action="store_true")
    p.set_defaults(func=_cmd_neighbors)

    p = sub.add_parser("bleu", help="corpus BLEU of a hypothesis file against a reference file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smooth", action="store_true", help="add-one smoothing above order 1")
    p.set_defaults(func=_cmd_bleu)

    p = sub.add_parser("pca", help="project a labeled vector dump to 2-D")
    p.add_argument("--vectors", required=True, help="TSV: lang, variant, v0..v{d-1}")
    p.add_argument("--out", required=True, help="projection TSV: lang, variant, x, y")
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser("dispersion",
                       help="mean distance of noisy representations to their seeds")
    p.add_argument("--vectors", required=True)
    p.add_argument("--seeds", help="separate seed dump (default: variant 'seed' rows)")
    p.add_argument("--compare", help="second model's dump; prints the dispersion ratio")
    p.set_defaults(func=_cmd_dispersion)

    p = sub.add_parser("protocol", help="robustness transfer experiments")
    proto_sub = p.add_subparsers(dest="protocol_command", required=True)
    run_p = proto_sub.add_parser("run", help="run the full two-phase protocol")
    run_p.add_argument("--config", required=True, help="experiment config JSON")
    run_p.set_defaults(func=_cmd_protocol_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args.parser = parser
    try:
        return args.func(args)
    except (MtRobustError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
