"""Human-evaluation backbone: adapted MQM error typology, 4-point quality
scale, annotation storage with optimistic versioning, agreement statistics,
and the HTTP service the annotation UI talks to."""

from .agreement import AgreementError, AgreementReport, cohen_kappa, compute_agreement, krippendorff_alpha
from .schema import (
    Dimension,
    ErrorAnnotation,
    Quality,
    QualityRating,
    RecordRef,
    SUBTYPES,
    TYPOLOGY,
    quality_summary,
    validate_annotations,
)
from .store import AnnotationStore, StoreConflict, StoreValidationError
from .exports import error_count_table, quality_counts, quality_table_csv, errors_table_csv

__all__ = [
    "AgreementError",
    "AgreementReport",
    "AnnotationStore",
    "Dimension",
    "ErrorAnnotation",
    "Quality",
    "QualityRating",
    "RecordRef",
    "SUBTYPES",
    "StoreConflict",
    "StoreValidationError",
    "TYPOLOGY",
    "cohen_kappa",
    "compute_agreement",
    "error_count_table",
    "errors_table_csv",
    "krippendorff_alpha",
    "quality_counts",
    "quality_summary",
    "quality_table_csv",
    "validate_annotations",
]
