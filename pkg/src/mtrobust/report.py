"""Rendering of transfer grids: Markdown, CSV of all cells, bar-chart TSV.

The Markdown grid mirrors the experiment write-up layout: one row per
(training setting, test setting) pair, one column per direction, the best
score per (direction, test condition) in bold (ties all bold), and the
relative-improvement annotation on matched-noise cells of the directions
that were never attacked during training.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .bleu import mark_best, round_half_up
from .protocol import ReportCell, Setting, TransferReport

SETTING_LABELS = {
    Setting.CLEAN: "clean corpus",
    Setting.CHAR: "character-level attack",
    Setting.WORD: "word-level attack",
    Setting.MULTI: "multi-level attack",
}


def format_delta(delta_pct: float) -> str:
    arrow = "↑" if delta_pct >= 0 else "↓"
    return f"{arrow}{round_half_up(abs(delta_pct), 1):.1f}%"


def _best_cells(report: TransferReport) -> set[tuple[Setting, Setting, object]]:
    """Cells attaining the per-(direction, test setting) maximum over
    training settings."""
    best = set()
    for direction in report.directions:
        for test in report.settings:
            column = [report.cell(train, test, direction).bleu for train in report.settings]
            for idx in mark_best(column):
                best.add((report.settings[idx], test, direction))
    return best


def _shows_delta(report: TransferReport, train: Setting, test: Setting, direction) -> bool:
    return (train is test and train is not Setting.CLEAN
            and direction != report.attacked_direction)


def render_markdown(report: TransferReport) -> str:
    report.require_complete()
    best = _best_cells(report)
    lines = ["# Robustness transfer grid", ""]
    lines.append(f"Attacked direction: {report.attacked_direction}")
    meta = report.metadata
    if meta:
        details = ", ".join(f"{k}={v}" for k, v in sorted(meta.items()))
        lines.append(f"Run: {details}")
    lines.append("")

    header = ["Training data", "Test data"]
    for direction in report.directions:
        marker = " (attacked)" if direction == report.attacked_direction else ""
        header.append(f"{direction}{marker}")
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join([" --- "] * len(header)) + "|")

    for train in report.settings:
        for test in report.settings:
            row = [SETTING_LABELS[train], SETTING_LABELS[test]]
            for direction in report.directions:
                cell = report.cell(train, test, direction)
                text = f"{round_half_up(cell.bleu, 1):.1f}"
                if (train, test, direction) in best:
                    text = f"**{text}**"
                if cell.delta_pct is not None and _shows_delta(report, train, test, direction):
                    text += f" ({format_delta(cell.delta_pct)})"
                row.append(text)
            lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines)


def write_grid_csv(report: TransferReport, path):
    """All cells, one row each: settings, direction, BLEU, delta, flags."""
    report.require_complete()
    best = _best_cells(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["train_setting", "test_setting", "direction", "bleu",
                         "delta_pct", "best", "attacked_direction"])
        for train in report.settings:
            for test in report.settings:
                for direction in report.directions:
                    cell = report.cell(train, test, direction)
                    writer.writerow([
                        train.value, test.value, str(direction),
                        f"{cell.bleu:.6f}",
                        "" if cell.delta_pct is None else f"{cell.delta_pct:.6f}",
                        int((train, test, direction) in best),
                        int(direction == report.attacked_direction),
                    ])


def write_deltas_tsv(report: TransferReport, path):
    """Bar-chart data: improvement of each noise-trained model on its own
    noise type, per direction (direction, setting, delta)."""
    report.require_complete()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = ["direction\tsetting\tdelta_pct"]
    for setting in report.settings:
        if setting is Setting.CLEAN:
            continue
        for direction in report.directions:
            cell = report.cell(setting, setting, direction)
            if cell.delta_pct is None:
                continue
            rows.append(f"{direction}\t{setting.value}\t{cell.delta_pct:.6f}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def render_report(report: TransferReport, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def fixture_report(attacked_direction, directions, grid,
                   settings=None) -> TransferReport:
    """Build a TransferReport from plain numbers, for offline rendering.

    grid maps (train_setting_name, test_setting_name, direction_string) to
    a BLEU score; deltas are derived against the clean-trained row.
    """
    from .corpus import Direction

    settings = list(settings) if settings else list(Setting)
    directions = [Direction.parse(d) if isinstance(d, str) else d for d in directions]
    attacked = (Direction.parse(attacked_direction)
                if isinstance(attacked_direction, str) else attacked_direction)
    cells = {}
    for train in settings:
        for test in settings:
            for direction in directions:
                bleu = grid[(train.value, test.value, str(direction))]
                baseline = grid.get((Setting.CLEAN.value, test.value, str(direction)))
                delta = None
                if baseline is not None and baseline > 0:
                    delta = (bleu - baseline) / baseline * 100.0
                cells[(train, test, direction)] = ReportCell(bleu, delta)
    return TransferReport(attacked, settings, directions, cells)
