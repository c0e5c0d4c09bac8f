"""Translation scoring and report tables.

BLEU is computed in-core (corpus-level, 1..4-grams, exponential brevity
penalty, no smoothing). Learned metrics run as an external scorer process so
the metric suite works without any model on disk. Cell summaries aggregate
per-item scores by (model, condition, mode, metric) and render as the two
report layouts used throughout: conditions x models, and auto/manual pairs.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
import subprocess
import tempfile
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .prompts import CONDITION_CODES

logger = logging.getLogger(__name__)

# Lowercase, split punctuation into standalone tokens, whitespace otherwise.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

BLEU_METRIC = "bleu"
EXTERNAL_METRIC = "external"


def tokenize_eval(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _clipped_counts(cand: list[str], ref: list[str], n: int) -> tuple[int, int]:
    total = max(0, len(cand) - n + 1)
    if total == 0:
        return 0, 0
    cand_grams = Counter(tuple(cand[i : i + n]) for i in range(total))
    ref_grams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    matched = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    return matched, total


def bleu(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Corpus BLEU in [0, 1], single reference per candidate.

    Geometric mean of modified n-gram precisions for n=1..4 with the
    exponential brevity penalty. No smoothing: any zero precision scores 0.
    Orders for which the whole candidate corpus supplies no n-grams (corpus
    shorter than n tokens) are dropped and the mean renormalizes over the
    rest, so identity still scores 1 on very short corpora.
    """
    if not candidates or not references:
        raise ValueError("empty corpus")
    if len(candidates) != len(references):
        raise ValueError("candidate and reference counts differ")
    cand_tokens = [tokenize_eval(c) for c in candidates]
    ref_tokens = [tokenize_eval(r) for r in references]
    cand_len = sum(len(t) for t in cand_tokens)
    ref_len = sum(len(t) for t in ref_tokens)
    if cand_len == 0:
        return 0.0

    log_sum = 0.0
    orders = 0
    for n in range(1, 5):
        matched = 0
        total = 0
        for cand, ref in zip(cand_tokens, ref_tokens):
            m, t = _clipped_counts(cand, ref, n)
            matched += m
            total += t
        if total == 0:
            continue
        if matched == 0:
            return 0.0
        log_sum += math.log(matched / total)
        orders += 1

    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_sum / orders)


@dataclass(frozen=True)
class EvaluationScore:
    """One metric value for one translation record."""

    item_id: str
    model_id: str
    condition: str
    mode: str
    metric: str
    value: float

    def __post_init__(self):
        if self.metric == BLEU_METRIC and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"BLEU value {self.value} outside [0, 1]")


def score_bleu(records, reference_by_item: dict[str, str]) -> list[EvaluationScore]:
    """Per-item BLEU (the corpus formula applied to a singleton corpus) for
    every OK record; failed records are skipped."""
    scores = []
    for record in records:
        if record.status != "ok":
            continue
        value = bleu([record.output_text], [reference_by_item[record.item_id]])
        scores.append(
            EvaluationScore(
                item_id=record.item_id,
                model_id=record.model_id,
                condition=record.condition,
                mode=record.mode,
                metric=BLEU_METRIC,
                value=value,
            )
        )
    return scores


class ScorerError(RuntimeError):
    """The external scorer failed or broke its line protocol."""


@dataclass(frozen=True)
class ExternalScorer:
    """Child-process scorer: reads a batch file of ``candidate<TAB>reference``
    lines (batch path appended as the last argument), writes one decimal per
    line, order-preserving. Tabs and newlines inside texts are replaced with
    spaces before writing the batch."""

    command: tuple[str, ...]
    timeout: float = 600.0

    def score(self, pairs: list[tuple[str, str]]) -> list[float]:
        clean = [
            (re.sub(r"[\t\n\r]", " ", c), re.sub(r"[\t\n\r]", " ", r)) for c, r in pairs
        ]
        with tempfile.NamedTemporaryFile("w", suffix=".tsv", delete=False, encoding="utf-8") as f:
            for cand, ref in clean:
                f.write(f"{cand}\t{ref}\n")
            batch_path = f.name
        try:
            proc = subprocess.run(
                [*self.command, batch_path],
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ScorerError(f"scorer did not run: {exc}") from exc
        finally:
            Path(batch_path).unlink(missing_ok=True)
        if proc.returncode != 0:
            raise ScorerError(f"scorer exited with status {proc.returncode}: {proc.stderr.strip()}")
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if len(lines) != len(pairs):
            raise ScorerError(f"scorer returned {len(lines)} values for {len(pairs)} inputs")
        try:
            return [float(line) for line in lines]
        except ValueError as exc:
            raise ScorerError(f"scorer emitted a non-numeric line: {exc}") from exc


def score_external(
    records, reference_by_item: dict[str, str], scorer: ExternalScorer
) -> list[EvaluationScore]:
    """Score every OK record in one scorer batch; no partial results."""
    ok_records = [r for r in records if r.status == "ok"]
    if not ok_records:
        return []
    values = scorer.score(
        [(r.output_text, reference_by_item[r.item_id]) for r in ok_records]
    )
    return [
        EvaluationScore(
            item_id=r.item_id,
            model_id=r.model_id,
            condition=r.condition,
            mode=r.mode,
            metric=EXTERNAL_METRIC,
            value=v,
        )
        for r, v in zip(ok_records, values)
    ]


@dataclass(frozen=True)
class CellSummary:
    """Mean of the item scores in one (model, condition, mode, metric) cell."""

    model_id: str
    condition: str
    mode: str
    metric: str
    mean: float
    n: int
    excluded: tuple[str, ...] = ()


def aggregate(scores: Iterable[EvaluationScore], excluded: dict[tuple, tuple[str, ...]] | None = None) -> list[CellSummary]:
    """One summary per cell present in the scores; means stay unrounded
    (rounding happens at display time only). ``excluded`` maps
    (model, condition, mode) to the item ids dropped as failures."""
    excluded = excluded or {}
    grouped: dict[tuple[str, str, str, str], list[float]] = {}
    order: list[tuple[str, str, str, str]] = []
    for score in scores:
        key = (score.model_id, score.condition, score.mode, score.metric)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(score.value)
    summaries = []
    for key in order:
        values = grouped[key]
        model_id, condition, mode, metric = key
        summaries.append(
            CellSummary(
                model_id=model_id,
                condition=condition,
                mode=mode,
                metric=metric,
                mean=sum(values) / len(values),
                n=len(values),
                excluded=excluded.get((model_id, condition, mode), ()),
            )
        )
    return summaries


class ReportLayout(str, Enum):
    TABLE1 = "table1"  # condition rows x model columns, automatic retrieval
    TABLE3 = "table3"  # auto/manual row pairs for g, m and cgm


_TABLE3_ROWS = [("g", "auto"), ("g", "manual"), ("m", "auto"), ("m", "manual"),
                ("cgm", "auto"), ("cgm", "manual")]

MISSING_CELL = "—"


def _model_order(summaries: Sequence[CellSummary]) -> list[str]:
    seen: list[str] = []
    for s in summaries:
        if s.model_id not in seen:
            seen.append(s.model_id)
    return seen


def _format_grid(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
    out_lines = []
    for row in [header, *rows]:
        out_lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(out_lines)


def emit_report(
    summaries: Sequence[CellSummary],
    layout: ReportLayout,
    metric: str | None = None,
) -> str:
    """Aligned text table; absent cells render as a dash and log a warning.

    Means print with two decimals. For the condition layout only automatic
    retrieval cells are shown.
    """
    metrics_present = {s.metric for s in summaries}
    if metric is None:
        metric = EXTERNAL_METRIC if EXTERNAL_METRIC in metrics_present else BLEU_METRIC
    cells = {(s.model_id, s.condition, s.mode): s for s in summaries if s.metric == metric}
    models = _model_order([s for s in summaries if s.metric == metric])
    if not models:
        logger.warning("no summaries for metric %r; emitting empty table", metric)

    def cell_text(model: str, condition: str, mode: str) -> str:
        summary = cells.get((model, condition, mode))
        if summary is None:
            logger.warning("missing cell: model=%s condition=%s mode=%s", model, condition, mode)
            return MISSING_CELL
        return f"{summary.mean:.2f}"

    if layout is ReportLayout.TABLE1:
        header = ["condition", *models]
        rows = [[code, *(cell_text(m, code, "auto") for m in models)] for code in CONDITION_CODES]
    else:
        header = ["cell", *models]
        rows = [
            [f"{code}-{mode}", *(cell_text(m, code, mode) for m in models)]
            for code, mode in _TABLE3_ROWS
        ]
    return _format_grid(header, rows)


SUMMARY_FIELDS = ["model", "condition", "mode", "metric", "mean", "n"]


def summaries_to_csv(summaries: Sequence[CellSummary]) -> str:
    """Machine-readable summary table (mean kept at full precision)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_FIELDS)
    for s in summaries:
        writer.writerow([s.model_id, s.condition, s.mode, s.metric, repr(s.mean), s.n])
    return buffer.getvalue()


def summaries_from_csv(text: str) -> list[CellSummary]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != SUMMARY_FIELDS:
        raise ValueError(f"unexpected summary header {header}")
    return [
        CellSummary(
            model_id=row[0], condition=row[1], mode=row[2], metric=row[3],
            mean=float(row[4]), n=int(row[5]),
        )
        for row in reader
    ]
