from .ingestion import (
    CANCER_WINDOW,
    FOLLOWUP_WINDOW,
    IngestionModule,
    aggregate_exam_score,
    aggregate_exams,
    image_level_records,
    label_exam,
    parse_exam_metadata,
    parse_exam_scores,
    parse_histories,
    parse_image_scores,
    parse_schema,
    population_summary,
    read_csv_rows,
    validate_against_schema,
    write_exam_scores,
)

__all__ = [
    "CANCER_WINDOW",
    "FOLLOWUP_WINDOW",
    "IngestionModule",
    "aggregate_exam_score",
    "aggregate_exams",
    "image_level_records",
    "label_exam",
    "parse_exam_metadata",
    "parse_exam_scores",
    "parse_histories",
    "parse_image_scores",
    "parse_schema",
    "population_summary",
    "read_csv_rows",
    "validate_against_schema",
    "write_exam_scores",
]
