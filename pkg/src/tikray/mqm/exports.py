"""Tabular exports of the annotation state.

Two layouts: per-model quality counts (rows are conditions, columns the four
quality levels plus the weighted summary) and per-model error counts (rows
are the "None" marker plus every subtype plus a total row, columns the
conditions). Both export to CSV and parse back exactly.
"""

from __future__ import annotations

import csv
import io
from typing import Mapping, Sequence

from ..llm import TranslationRecord
from ..prompts import CONDITION_CODES
from .schema import ErrorAnnotation, Quality, QualityRating, SUBTYPES, quality_summary

QUALITY_COLUMNS = [Quality.NONE, Quality.LOW, Quality.MED, Quality.HIGH]

NONE_ROW = "None"
TOTAL_ROW = "Total"


def _modes(records: Sequence[TranslationRecord]) -> list[str]:
    seen: list[str] = []
    for r in records:
        if r.mode not in seen:
            seen.append(r.mode)
    return seen


def _models(records: Sequence[TranslationRecord]) -> list[str]:
    seen: list[str] = []
    for r in records:
        if r.model_id not in seen:
            seen.append(r.model_id)
    return seen


def _conditions(records: Sequence[TranslationRecord]) -> list[str]:
    present = {r.condition for r in records}
    return [c for c in CONDITION_CODES if c in present]


def quality_counts(
    records: Sequence[TranslationRecord], ratings: Sequence[QualityRating]
) -> dict[tuple[str, str, str], dict[Quality, int]]:
    """Rating counts per (model, condition, mode) cell; every cell of the run
    appears even when empty. Each (record, annotator) rating counts once."""
    counts: dict[tuple[str, str, str], dict[Quality, int]] = {}
    for r in records:
        counts.setdefault(
            (r.model_id, r.condition, r.mode), {q: 0 for q in QUALITY_COLUMNS}
        )
    for rating in ratings:
        key = (rating.ref.model_id, rating.ref.condition, rating.ref.mode)
        if key in counts:
            counts[key][rating.quality] += 1
    return counts


def quality_table_csv(
    records: Sequence[TranslationRecord], ratings: Sequence[QualityRating]
) -> str:
    """CSV quality table: model, condition, mode, the four counts, summary."""
    counts = quality_counts(records, ratings)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["model", "condition", "mode", *(q.value for q in QUALITY_COLUMNS), "summary"]
    )
    for model in _models(records):
        for mode in _modes(records):
            for condition in _conditions(records):
                cell = counts.get((model, condition, mode))
                if cell is None:
                    continue
                writer.writerow(
                    [model, condition, mode]
                    + [cell[q] for q in QUALITY_COLUMNS]
                    + [quality_summary(cell)]
                )
    return buffer.getvalue()


def parse_quality_table(text: str) -> dict[tuple[str, str, str], dict[Quality, int]]:
    """Inverse of quality_table_csv (summary column is recomputed, not trusted)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    expected = ["model", "condition", "mode", *(q.value for q in QUALITY_COLUMNS), "summary"]
    if header != expected:
        raise ValueError(f"unexpected quality table header {header}")
    out: dict[tuple[str, str, str], dict[Quality, int]] = {}
    for row in reader:
        model, condition, mode = row[0], row[1], row[2]
        cell = {q: int(row[3 + i]) for i, q in enumerate(QUALITY_COLUMNS)}
        if int(row[7]) != quality_summary(cell):
            raise ValueError(f"summary column does not match counts in row {row}")
        out[(model, condition, mode)] = cell
    return out


def error_count_table(
    annotations: Sequence[ErrorAnnotation],
    records: Sequence[TranslationRecord],
    model_id: str,
    mode: str | None = None,
) -> dict[str, dict[str, int]]:
    """Counts per subtype per condition for one model, plus a "None" row for
    records carrying zero error annotations and a total row (which includes
    the "None" row, matching how the counts read as "taggings per record")."""
    model_records = [
        r for r in records if r.model_id == model_id and (mode is None or r.mode == mode)
    ]
    conditions = _conditions(model_records)
    table: dict[str, dict[str, int]] = {
        row: {c: 0 for c in conditions} for row in (NONE_ROW, *SUBTYPES, TOTAL_ROW)
    }
    annotated_refs = set()
    for a in annotations:
        if a.ref.model_id != model_id or (mode is not None and a.ref.mode != mode):
            continue
        if a.ref.condition not in table[a.subtype]:
            continue
        table[a.subtype][a.ref.condition] += 1
        annotated_refs.add((a.ref.item_id, a.ref.condition, a.ref.mode))
    for r in model_records:
        if (r.item_id, r.condition, r.mode) not in annotated_refs:
            table[NONE_ROW][r.condition] += 1
    for condition in conditions:
        table[TOTAL_ROW][condition] = sum(
            table[row][condition] for row in (NONE_ROW, *SUBTYPES)
        )
    return table


def errors_table_csv(table: Mapping[str, Mapping[str, int]]) -> str:
    """CSV error-count table: one row per subtype (plus None/Total), one
    column per condition, and a trailing row-total column."""
    conditions = list(next(iter(table.values())).keys()) if table else []
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["subtype", *conditions, "total"])
    for row_name in (NONE_ROW, *SUBTYPES, TOTAL_ROW):
        row = table[row_name]
        writer.writerow([row_name, *(row[c] for c in conditions), sum(row[c] for c in conditions)])
    return buffer.getvalue()


def parse_errors_table(text: str) -> dict[str, dict[str, int]]:
    """Inverse of errors_table_csv (row totals are validated, then dropped)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[0] != "subtype" or header[-1] != "total":
        raise ValueError(f"unexpected errors table header {header}")
    conditions = header[1:-1]
    out: dict[str, dict[str, int]] = {}
    for row in reader:
        name = row[0]
        counts = {c: int(v) for c, v in zip(conditions, row[1:-1])}
        if int(row[-1]) != sum(counts.values()):
            raise ValueError(f"row total does not match counts in row {row}")
        out[name] = counts
    return out
