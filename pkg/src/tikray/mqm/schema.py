"""Error typology, quality scale, and annotation validation rules.

The typology is a closed set of subtypes grouped under four dimensions.
Annotators may tag at most three errors per output, except that target-
language errors are exempt from the cap (they describe the output, not the
translation relation, and can co-occur freely).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Dimension(str, Enum):
    ACCURACY = "accuracy"
    TARGET_ERROR = "target_error"
    NON_TRANSLATION = "non_translation"
    MODEL_ERROR = "model_error"


# Closed subtype set, in canonical table order.
TYPOLOGY: dict[str, Dimension] = {
    "Addition": Dimension.ACCURACY,
    "Omission": Dimension.ACCURACY,
    "Substitution-Subject": Dimension.ACCURACY,
    "Substitution-TAM": Dimension.ACCURACY,
    "Substitution-Other": Dimension.ACCURACY,
    "Overtranslation": Dimension.ACCURACY,
    "Undertranslation": Dimension.ACCURACY,
    "TE-Grammar": Dimension.TARGET_ERROR,
    "TE-Coherence": Dimension.TARGET_ERROR,
    "TE-Style/Register": Dimension.TARGET_ERROR,
    "Complete Mistranslation": Dimension.NON_TRANSLATION,
    "Mistranslation-Lexical Correspondence": Dimension.NON_TRANSLATION,
    "Refusal": Dimension.NON_TRANSLATION,
    "Garbled": Dimension.MODEL_ERROR,
    "ChattyGPT": Dimension.MODEL_ERROR,
}

SUBTYPES: tuple[str, ...] = tuple(TYPOLOGY)

SUBTYPE_DESCRIPTIONS: dict[str, str] = {
    "Addition": "Translation includes information not present in the source without displacing source content.",
    "Omission": "Translation is missing content from the source.",
    "Substitution-Subject": "Novel subject marking substituted for the source's in the highlighted span.",
    "Substitution-TAM": "Novel tense/aspect/modality substituted for the source's in the highlighted span.",
    "Substitution-Other": "Substitution not involving subject or TAM marking.",
    "Overtranslation": "Target content inappropriately more specific than the source.",
    "Undertranslation": "Target content inappropriately less specific than the source.",
    "TE-Grammar": "The highlighted span is not grammatical in the target language.",
    "TE-Coherence": "The highlighted span is unnatural or incoherent in the target language.",
    "TE-Style/Register": "The highlighted span's style or register is inappropriate for the content.",
    "Complete Mistranslation": "Coherent target text whose core predicate shows no connection to the reference.",
    "Mistranslation-Lexical Correspondence": "Coherent target text with only minor correspondences to the reference.",
    "Refusal": "The model does not attempt to translate into the target language.",
    "Garbled": "Output does not contain coherent text in the target language.",
    "ChattyGPT": "Output contains translated content but is wordy, over-explanatory, or truncated.",
}

MAX_COUNTED_ERRORS = 3


class Quality(str, Enum):
    NONE = "none"
    LOW = "low"
    MED = "med"
    HIGH = "high"


QUALITY_WEIGHTS: dict[Quality, int] = {
    Quality.HIGH: 3,
    Quality.MED: 2,
    Quality.LOW: 1,
    Quality.NONE: 0,
}

QUALITY_DESCRIPTIONS: dict[Quality, str] = {
    Quality.HIGH: "Output is an accurate and/or acceptable translation of the source content.",
    Quality.MED: (
        "Output contains errors that prevent it from being an acceptable translation, "
        "but is generally high in quality otherwise."
    ),
    Quality.LOW: (
        "Output contains errors that prevent it from being an acceptable translation, "
        "with minor correspondences that vaguely identify it as relevant to the source."
    ),
    Quality.NONE: "Output does not appear to be relevant to the source.",
}


@dataclass(frozen=True)
class RecordRef:
    """Identity of one translation record: (item, model, condition, mode)."""

    item_id: str
    model_id: str
    condition: str
    mode: str

    SEPARATOR = "~"

    def __post_init__(self):
        for value in (self.item_id, self.model_id, self.condition, self.mode):
            if self.SEPARATOR in value:
                raise ValueError(f"record ref field may not contain {self.SEPARATOR!r}: {value!r}")

    def __str__(self) -> str:
        return self.SEPARATOR.join((self.item_id, self.model_id, self.condition, self.mode))

    @classmethod
    def parse(cls, text: str) -> "RecordRef":
        parts = text.split(cls.SEPARATOR)
        if len(parts) != 4:
            raise ValueError(f"bad record ref {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class ErrorAnnotation:
    """One tagged error, optionally anchored to a character span of the output."""

    ref: RecordRef
    annotator_id: str
    subtype: str
    span: tuple[int, int] | None = None
    note: str = ""

    def __post_init__(self):
        if self.subtype not in TYPOLOGY:
            raise ValueError(f"unknown error subtype {self.subtype!r}")
        if not self.annotator_id:
            raise ValueError("annotator_id must be non-empty")

    @property
    def dimension(self) -> Dimension:
        return TYPOLOGY[self.subtype]


@dataclass(frozen=True)
class QualityRating:
    ref: RecordRef
    annotator_id: str
    quality: Quality

    def __post_init__(self):
        if not self.annotator_id:
            raise ValueError("annotator_id must be non-empty")


def validate_annotations(
    ref: RecordRef,
    annotations: list[ErrorAnnotation],
    rating: QualityRating | None,
    output_text: str,
) -> list[str]:
    """Rule violations for one annotator's state on one record (empty = ok).

    Rules: at most three errors outside the target-error dimension; spans
    must lie within the output text; a quality of "none" requires either no
    annotations at all or at least one non-translation/model-error tag.
    """
    violations: list[str] = []
    counted = [a for a in annotations if a.dimension is not Dimension.TARGET_ERROR]
    if len(counted) > MAX_COUNTED_ERRORS:
        violations.append(
            f"max {MAX_COUNTED_ERRORS} non-target errors per record (got {len(counted)})"
        )
    for annotation in annotations:
        if annotation.ref != ref:
            violations.append(f"annotation for foreign record {annotation.ref}")
        if annotation.span is not None:
            start, end = annotation.span
            if not (0 <= start < end <= len(output_text)):
                violations.append(
                    f"span ({start}, {end}) outside output bounds [0, {len(output_text)}]"
                )
    if rating is not None and rating.quality is Quality.NONE and annotations:
        structural = any(
            a.dimension in (Dimension.NON_TRANSLATION, Dimension.MODEL_ERROR) for a in annotations
        )
        if not structural:
            violations.append(
                'quality "none" requires a non-translation or model-error tag (or no tags)'
            )
    return violations


def quality_summary(counts: dict) -> int:
    """Weighted quality count: 3*high + 2*med + 1*low + 0*none."""
    total = 0
    for quality, weight in QUALITY_WEIGHTS.items():
        raw = counts.get(quality, counts.get(quality.value, 0))
        if raw < 0:
            raise ValueError(f"negative count for {quality.value}")
        total += weight * raw
    return total
