import csv
import re

import pytest

from mtrobust.errors import IncompleteGridError
from mtrobust.protocol import ReportCell, Setting, TransferReport
from mtrobust.corpus import Direction
from mtrobust.report import (
    fixture_report,
    format_delta,
    render_markdown,
    render_report,
    write_deltas_tsv,
    write_grid_csv,
)

SETTINGS = ["clean", "char", "word", "multi"]


def small_grid():
    directions = ["en-fr", "en-ja"]
    values = {
        ("clean", "clean"): (40.0, 15.0), ("clean", "char"): (28.0, 9.6),
        ("clean", "word"): (30.0, 11.0), ("clean", "multi"): (29.0, 10.0),
        ("char", "clean"): (39.0, 15.0), ("char", "char"): (38.8, 12.2),
        ("char", "word"): (31.0, 11.2), ("char", "multi"): (33.0, 11.5),
        ("word", "clean"): (38.0, 14.0), ("word", "char"): (30.0, 10.0),
        ("word", "word"): (35.0, 11.7), ("word", "multi"): (32.0, 10.4),
        ("multi", "clean"): (39.0, 14.9), ("multi", "char"): (37.0, 12.0),
        ("multi", "word"): (34.0, 11.7), ("multi", "multi"): (35.0, 12.0),
    }
    grid = {}
    for (train, test), (fr, ja) in values.items():
        grid[(train, test, "en-fr")] = fr
        grid[(train, test, "en-ja")] = ja
    return fixture_report("en-fr", directions, grid)


def markdown_cells(markdown):
    """Map (row index, column header) -> cell text for the grid table."""
    lines = [l for l in markdown.splitlines() if l.startswith("|")]
    header = [h.strip() for h in lines[0].strip("|").split("|")]
    out = {}
    for i, line in enumerate(lines[2:]):
        fields = [f.strip() for f in line.strip("|").split("|")]
        for name, value in zip(header, fields):
            out[(i, name)] = value
    return out


def test_markdown_bolds_column_max_per_test_condition():
    report = small_grid()
    md = render_markdown(report)
    cells = markdown_cells(md)
    # char-test rows are rows 1, 5, 9, 13; en-fr column max is 38.8 (row 5)
    col = "en-fr (attacked)"
    assert cells[(5, col)].startswith("**38.8**")
    for row in (1, 9, 13):
        assert not cells[(row, col)].startswith("**")


def test_markdown_marks_ties_everywhere():
    directions = ["en-fr"]
    grid = {}
    for train in SETTINGS:
        for test in SETTINGS:
            grid[(train, test, "en-fr")] = 10.0  # everything ties
    md = render_markdown(fixture_report("en-fr", directions, grid))
    cells = markdown_cells(md)
    for row in range(16):
        assert cells[(row, "en-fr (attacked)")].startswith("**10.0**")


def test_markdown_deltas_only_on_matched_noise_non_attacked():
    report = small_grid()
    md = render_markdown(report)
    cells = markdown_cells(md)
    # (char, char) row: delta on en-ja (non-attacked), not on en-fr
    assert "↑27.1%" in cells[(5, "en-ja")]
    assert "%" not in cells[(5, "en-fr (attacked)")]
    # clean rows carry no delta annotation
    for row in range(4):
        assert "%" not in cells[(row, "en-ja")]
    # mismatched train/test rows carry no delta annotation
    assert "%" not in cells[(6, "en-ja")]


def test_format_delta_signs():
    assert format_delta(27.08) == "↑27.1%"
    assert format_delta(0.0) == "↑0.0%"
    assert format_delta(-1.26) == "↓1.3%"


def test_grid_csv_row_count_and_content(tmp_path):
    report = small_grid()
    path = tmp_path / "grid.csv"
    write_grid_csv(report, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 * 4 * 2  # settings^2 x directions
    first = rows[0]
    assert set(first) == {"train_setting", "test_setting", "direction", "bleu",
                          "delta_pct", "best", "attacked_direction"}
    char_char_ja = [r for r in rows if r["train_setting"] == "char"
                    and r["test_setting"] == "char" and r["direction"] == "en-ja"][0]
    assert float(char_char_ja["bleu"]) == pytest.approx(12.2)
    assert float(char_char_ja["delta_pct"]) == pytest.approx((12.2 - 9.6) / 9.6 * 100)
    assert char_char_ja["best"] == "1"


def test_deltas_tsv_shape(tmp_path):
    report = small_grid()
    path = tmp_path / "deltas.tsv"
    write_deltas_tsv(report, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "direction\tsetting\tdelta_pct"
    assert len(lines) == 1 + 3 * 2  # three noise settings x two directions
    for line in lines[1:]:
        direction, setting, delta = line.split("\t")
        assert setting in {"char", "word", "multi"}
        float(delta)


def test_incomplete_grid_rejected():
    report = small_grid()
    del report.cells[(Setting.CHAR, Setting.WORD, Direction("en", "ja"))]
    with pytest.raises(IncompleteGridError):
        render_markdown(report)


def test_render_report_dispatch():
    report = small_grid()
    assert render_report(report, "markdown") == render_markdown(report)
    with pytest.raises(ValueError):
        render_report(report, "pdf")


def test_partial_settings_report():
    directions = ["en-fr"]
    grid = {}
    for train in ("clean", "char"):
        for test in ("clean", "char"):
            grid[(train, test, "en-fr")] = 10.0 + (train == "char")
    report = fixture_report("en-fr", directions, grid,
                            settings=[Setting.CLEAN, Setting.CHAR])
    md = render_markdown(report)
    assert md.count("| clean corpus |") >= 1
    rows = [l for l in md.splitlines() if l.startswith("|")]
    assert len(rows) == 2 + 4  # header, separator, 2x2 grid
