"""Durable annotation storage.

Every committed write appends one JSON event to a log file; reopening the
store replays the log, so a crash loses nothing that was acknowledged.
Writes supersede (the latest annotation set / rating per annotator wins) and
are guarded by a per-record version that increments on every commit; a write
carrying a stale version is rejected with the current one.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..llm import TranslationRecord
from .schema import ErrorAnnotation, Quality, QualityRating, RecordRef, validate_annotations


class StoreError(RuntimeError):
    pass


class StoreConflict(StoreError):
    """Write carried a stale version; payload includes the current one."""

    def __init__(self, ref: RecordRef, current_version: int):
        super().__init__(f"version conflict on {ref} (current version {current_version})")
        self.ref = ref
        self.current_version = current_version


class StoreValidationError(StoreError):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class UnknownRecordError(StoreError):
    pass


@dataclass
class RecordState:
    """Mutable annotation state of one translation record."""

    record: TranslationRecord
    prompt: str = ""
    version: int = 0
    annotations: dict[str, tuple[ErrorAnnotation, ...]] = field(default_factory=dict)
    ratings: dict[str, QualityRating] = field(default_factory=dict)


def _annotation_to_dict(a: ErrorAnnotation) -> dict:
    return {"subtype": a.subtype, "span": list(a.span) if a.span else None, "note": a.note}


def _annotation_from_dict(ref: RecordRef, annotator: str, data: dict) -> ErrorAnnotation:
    span = tuple(data["span"]) if data.get("span") else None
    return ErrorAnnotation(
        ref=ref, annotator_id=annotator, subtype=data["subtype"], span=span, note=data.get("note", "")
    )


class AnnotationStore:
    """Annotation state for one or more completed runs.

    ``runs`` maps run id to its translation records; ``prompts`` optionally
    supplies the full prompt text per record ref (shown in the UI behind a
    toggle).
    """

    def __init__(
        self,
        runs: Mapping[str, Sequence[TranslationRecord]],
        item_texts: Mapping[str, tuple[str, str]],
        prompts: Mapping[str, str] | None = None,
        log_path: str | Path | None = None,
    ):
        self._lock = threading.RLock()
        self._runs: dict[str, list[RecordRef]] = {}
        self._states: dict[str, RecordState] = {}
        self._ref_run: dict[str, str] = {}
        self.item_texts = dict(item_texts)
        prompts = prompts or {}
        for run_id, records in runs.items():
            refs = []
            for record in records:
                ref = RecordRef(record.item_id, record.model_id, record.condition, record.mode)
                key = str(ref)
                if key in self._states:
                    raise StoreError(f"duplicate record ref {key} across runs")
                self._states[key] = RecordState(record=record, prompt=prompts.get(key, ""))
                self._ref_run[key] = run_id
                refs.append(ref)
            self._runs[run_id] = refs
        self._log_path = Path(log_path) if log_path else None
        if self._log_path and self._log_path.exists():
            self._replay()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def for_run(
        cls,
        run_id: str,
        records: Sequence[TranslationRecord],
        item_texts: Mapping[str, tuple[str, str]],
        prompts: Mapping[str, str] | None = None,
        log_path: str | Path | None = None,
    ) -> "AnnotationStore":
        return cls({run_id: records}, item_texts, prompts, log_path)

    # -- log replay ------------------------------------------------------------

    def _replay(self) -> None:
        for line in self._log_path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            ref = RecordRef.parse(event["ref"])
            state = self._states.get(str(ref))
            if state is None:
                continue  # log may cover records from runs not loaded now
            annotator = event["annotator"]
            if event["type"] == "annotations":
                state.annotations[annotator] = tuple(
                    _annotation_from_dict(ref, annotator, a) for a in event["annotations"]
                )
            elif event["type"] == "quality":
                state.ratings[annotator] = QualityRating(
                    ref=ref, annotator_id=annotator, quality=Quality(event["quality"])
                )
            state.version = event["version"]

    def _append(self, event: dict) -> None:
        if self._log_path is None:
            return
        self._log_path.parent.mkdir(parents=True, exist_ok=True)
        with self._log_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(event, ensure_ascii=False) + "\n")
            f.flush()

    # -- reads ------------------------------------------------------------------

    @property
    def run_ids(self) -> list[str]:
        return list(self._runs)

    def refs_for_run(self, run_id: str) -> list[RecordRef]:
        if run_id not in self._runs:
            raise UnknownRecordError(f"unknown run {run_id!r}")
        return list(self._runs[run_id])

    def run_for_ref(self, ref: RecordRef) -> str:
        key = str(ref)
        if key not in self._ref_run:
            raise UnknownRecordError(f"unknown record {key}")
        return self._ref_run[key]

    def state(self, ref: RecordRef) -> RecordState:
        key = str(ref)
        if key not in self._states:
            raise UnknownRecordError(f"unknown record {key}")
        return self._states[key]

    def records_for_run(self, run_id: str) -> list[TranslationRecord]:
        return [self.state(ref).record for ref in self.refs_for_run(run_id)]

    def annotations_for_run(self, run_id: str) -> list[ErrorAnnotation]:
        out: list[ErrorAnnotation] = []
        for ref in self.refs_for_run(run_id):
            for annotations in self.state(ref).annotations.values():
                out.extend(annotations)
        return out

    def ratings_for_run(self, run_id: str) -> list[QualityRating]:
        out: list[QualityRating] = []
        for ref in self.refs_for_run(run_id):
            out.extend(self.state(ref).ratings.values())
        return out

    # -- writes -----------------------------------------------------------------

    def _check_version(self, state: RecordState, expected_version: int | None, ref: RecordRef):
        if expected_version is not None and expected_version != state.version:
            raise StoreConflict(ref, state.version)

    def submit_annotations(
        self,
        ref: RecordRef,
        annotator_id: str,
        annotations: Iterable[ErrorAnnotation],
        expected_version: int | None = None,
    ) -> int:
        """Replace one annotator's error set for a record. Returns the new version."""
        annotations = tuple(annotations)
        with self._lock:
            state = self.state(ref)
            self._check_version(state, expected_version, ref)
            violations = validate_annotations(
                ref, list(annotations), state.ratings.get(annotator_id), state.record.output_text
            )
            if violations:
                raise StoreValidationError(violations)
            state.annotations[annotator_id] = annotations
            state.version += 1
            self._append(
                {
                    "type": "annotations",
                    "ref": str(ref),
                    "annotator": annotator_id,
                    "annotations": [_annotation_to_dict(a) for a in annotations],
                    "version": state.version,
                }
            )
            return state.version

    def submit_quality(
        self,
        ref: RecordRef,
        annotator_id: str,
        quality: Quality,
        expected_version: int | None = None,
    ) -> int:
        """Set one annotator's quality rating for a record. Returns the new version."""
        with self._lock:
            state = self.state(ref)
            self._check_version(state, expected_version, ref)
            rating = QualityRating(ref=ref, annotator_id=annotator_id, quality=quality)
            violations = validate_annotations(
                ref,
                list(state.annotations.get(annotator_id, ())),
                rating,
                state.record.output_text,
            )
            if violations:
                raise StoreValidationError(violations)
            state.ratings[annotator_id] = rating
            state.version += 1
            self._append(
                {
                    "type": "quality",
                    "ref": str(ref),
                    "annotator": annotator_id,
                    "quality": quality.value,
                    "version": state.version,
                }
            )
            return state.version

    # -- agreement inputs ---------------------------------------------------------

    def agreement_inputs(self, run_id: str):
        """(ratings, subtype sets) keyed by annotator, for compute_agreement."""
        ratings: dict[str, dict[str, str]] = {}
        subtype_sets: dict[str, dict[str, frozenset[str]]] = {}
        for ref in self.refs_for_run(run_id):
            state = self.state(ref)
            key = str(ref)
            for annotator, rating in state.ratings.items():
                ratings.setdefault(annotator, {})[key] = rating.quality.value
            for annotator, annotations in state.annotations.items():
                subtype_sets.setdefault(annotator, {})[key] = frozenset(
                    a.subtype for a in annotations
                )
        return ratings, subtype_sets
