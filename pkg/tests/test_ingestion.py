"""
Tests for file parsing, exam aggregation, labeling and schema validation.
"""

from datetime import date, timedelta

import pytest
from hypothesis import given, strategies as st

from shortcut_audit.exceptions import InputValidationError, SchemaViolationError
from shortcut_audit.models import (
    AttributeSchema,
    BiopsyEvent,
    BiopsyOutcome,
    ExamHistory,
    ExamLabel,
    ExamRecord,
    FollowupAssessment,
    ImageScoreRecord,
    Laterality,
)
from shortcut_audit.modules.ingestion import (
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
    validate_against_schema,
    write_exam_scores,
)

IMAGE_HEADER = "image_id,exam_id,laterality,view,score\n"


def image(score, side="Left", exam_id="e1", image_id=None):
    return ImageScoreRecord(
        image_id=image_id or f"{exam_id}-{side}-{score}", exam_id=exam_id,
        laterality=Laterality(side), view="CC", score=score,
    )


class TestParseImageScores:
    def test_valid_rows(self, write_text):
        path = write_text("images.csv", IMAGE_HEADER + "i1,e1,Left,CC,0.2\ni2,e1,R,MLO,0.4\n")
        records = parse_image_scores(path)
        assert [r.image_id for r in records] == ["i1", "i2"]
        assert records[1].laterality == Laterality.RIGHT
        assert records[1].score == 0.4

    def test_score_out_of_range_names_line(self, write_text):
        path = write_text("images.csv", IMAGE_HEADER + "i1,e1,Left,CC,0.2\ni2,e1,Left,CC,1.2\n")
        with pytest.raises(InputValidationError) as excinfo:
            parse_image_scores(path)
        assert excinfo.value.line == 3
        assert excinfo.value.column == "score"
        assert "1.2" in str(excinfo.value)

    def test_header_only(self, write_text):
        assert parse_image_scores(write_text("images.csv", IMAGE_HEADER)) == []

    def test_short_row(self, write_text):
        path = write_text("images.csv", IMAGE_HEADER + "i1,e1,Left,0.2\n")
        with pytest.raises(InputValidationError) as excinfo:
            parse_image_scores(path)
        assert excinfo.value.line == 2

    def test_missing_laterality_rejected(self, write_text):
        path = write_text("images.csv", IMAGE_HEADER + "i1,e1,,CC,0.2\n")
        with pytest.raises(InputValidationError) as excinfo:
            parse_image_scores(path)
        assert excinfo.value.column == "laterality"

    def test_duplicate_image_id(self, write_text):
        path = write_text("images.csv", IMAGE_HEADER + "i1,e1,Left,CC,0.2\ni1,e1,Left,CC,0.3\n")
        with pytest.raises(InputValidationError, match="duplicate"):
            parse_image_scores(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputValidationError) as excinfo:
            parse_image_scores(tmp_path / "nope.csv")
        assert "nope.csv" in str(excinfo.value)


class TestAggregateExamScore:
    def test_mean_then_max(self):
        assert aggregate_exam_score([image(0.2), image(0.4), image(0.1, "Right")]) == pytest.approx(0.3)

    def test_single_image(self):
        assert aggregate_exam_score([image(0.7)]) == 0.7

    def test_other_breast_wins(self):
        assert aggregate_exam_score([image(0.0), image(1.0), image(0.6, "Right")]) == pytest.approx(0.6)

    def test_no_images(self):
        with pytest.raises(InputValidationError, match="no images for exam"):
            aggregate_exam_score([])

    @given(
        st.lists(
            st.tuples(st.floats(0.0, 1.0), st.sampled_from(["Left", "Right"])), min_size=1, max_size=12
        ),
        st.randoms(use_true_random=False),
    )
    def test_bounded_and_permutation_invariant(self, pairs, rnd):
        images = [image(s, side, image_id=f"i{k}") for k, (s, side) in enumerate(pairs)]
        value = aggregate_exam_score(images)
        scores = [s for s, _ in pairs]
        assert min(scores) - 1e-12 <= value <= max(scores) + 1e-12
        shuffled = list(images)
        rnd.shuffle(shuffled)
        assert aggregate_exam_score(shuffled) == pytest.approx(value, abs=1e-15)


EXAM_DATE = date(2020, 1, 1)


def days(n):
    return EXAM_DATE + timedelta(days=n)


def history(biopsies=(), followups=()):
    return ExamHistory(
        exam_date=EXAM_DATE,
        biopsy_events=[BiopsyEvent(date=days(d), outcome=o) for d, o in biopsies],
        followup_assessments=[FollowupAssessment(date=days(d), birads=b) for d, b in followups],
    )


MALIGNANT = BiopsyOutcome.MALIGNANT
BENIGN = BiopsyOutcome.BENIGN_OR_HIGH_RISK

LABELING_CASES = [
    ("malignant biopsy at 6 months", history(biopsies=[(182, MALIGNANT)]), 4, ExamLabel.CANCER),
    ("exam BI-RADS 6 without events", history(), 6, ExamLabel.CANCER),
    ("malignant biopsy exactly at 365 days", history(biopsies=[(365, MALIGNANT)]), 4, ExamLabel.CANCER),
    (
        "malignant biopsy after the window",
        history(biopsies=[(366, MALIGNANT)], followups=[(200, 2), (760, 1)]), 1, ExamLabel.UNKNOWN,
    ),
    ("clean follow-up past 25 months", history(followups=[(180, 1), (400, 2), (760, 1)]), 1, ExamLabel.NON_CANCER),
    ("follow-up ends at 12 months", history(followups=[(365, 1)]), 1, ExamLabel.UNKNOWN),
    ("follow-up exactly at 730 days", history(followups=[(730, 2)]), 1, ExamLabel.NON_CANCER),
    ("suspicious assessment inside follow-up", history(followups=[(400, 4), (760, 1)]), 1, ExamLabel.UNKNOWN),
    (
        "benign biopsy inside the window then clean follow-up",
        history(biopsies=[(100, BENIGN)], followups=[(750, 2)]), 4, ExamLabel.NON_CANCER,
    ),
    (
        "benign biopsy after the window",
        history(biopsies=[(400, BENIGN)], followups=[(760, 1)]), 1, ExamLabel.UNKNOWN,
    ),
    (
        "events before the exam are ignored",
        history(biopsies=[(-30, MALIGNANT)], followups=[(-10, 5), (740, 2)]), 2, ExamLabel.NON_CANCER,
    ),
    ("no follow-up at all", history(), 2, ExamLabel.UNKNOWN),
]


@pytest.mark.parametrize("case,hist,birads,expected", LABELING_CASES, ids=[c[0] for c in LABELING_CASES])
def test_label_exam(case, hist, birads, expected):
    assert label_exam(hist, birads) == expected


def test_parse_histories(write_text):
    path = write_text(
        "history.jsonl",
        '{"exam_id": "e1", "exam_date": "2020-01-01", "exam_birads": 1, '
        '"biopsies": [{"date": "2020-03-01", "outcome": "malignant"}], "followups": []}\n'
        "\n"
        '{"exam_id": "e2", "exam_date": "2020-01-01", "exam_birads": 2, '
        '"biopsies": [], "followups": [{"date": "2022-02-01", "birads": 1}]}\n',
    )
    parsed = parse_histories(path)
    assert [e for e, _, _ in parsed] == ["e1", "e2"]
    assert [label_exam(h, b) for _, h, b in parsed] == [ExamLabel.CANCER, ExamLabel.NON_CANCER]


def test_parse_histories_bad_line(write_text):
    path = write_text(
        "history.jsonl",
        '{"exam_id": "e1", "exam_date": "2020-01-01", "exam_birads": 1}\n'
        '{"exam_id": "e2", "exam_date": "2020-13-45", "exam_birads": 1}\n',
    )
    with pytest.raises(InputValidationError) as excinfo:
        parse_histories(path)
    assert excinfo.value.line == 2


class TestSchema:
    def test_parse(self, write_json, schema_doc):
        schema = parse_schema(write_json("schema.json", schema_doc))
        assert schema.names == ["dataset", "scanner"]
        assert schema.get("dataset").high_prevalence_value == "B"

    def test_single_value_rejected(self, write_json):
        with pytest.raises(InputValidationError):
            parse_schema(write_json("schema.json", {"attributes": [{"name": "dataset", "values": ["A"]}]}))

    def test_high_value_must_be_member(self, write_json):
        doc = {"attributes": [{"name": "dataset", "values": ["A", "B"], "high_prevalence_value": "C"}]}
        with pytest.raises(InputValidationError):
            parse_schema(write_json("schema.json", doc))

    def test_validation_report(self, schema_doc):
        schema = AttributeSchema.model_validate(schema_doc)
        good = ExamRecord(exam_id="a", score=0.5, label="cancer", attributes={"dataset": "A", "scanner": "HS1"})
        bad_value = ExamRecord(exam_id="b", score=0.5, label="cancer", attributes={"dataset": "A", "scanner": "HS2"})
        missing = ExamRecord(exam_id="c", score=0.5, label="cancer", attributes={"dataset": "B"})
        assert validate_against_schema([good], schema).valid
        report = validate_against_schema([good, bad_value], schema)
        assert [(v.exam_id, v.problem) for v in report.violations] == [("b", "undeclared value")]
        report = validate_against_schema([missing], schema)
        assert [(v.exam_id, v.attribute) for v in report.violations] == [("c", "scanner")]


class TestExamFiles:
    def test_parse_exam_scores(self, exam_csv, schema_doc):
        exams = parse_exam_scores(exam_csv, AttributeSchema.model_validate(schema_doc))
        assert len(exams) == 12
        assert exams[0].attributes == {"dataset": "B", "scanner": "HS1"}
        assert exams[10].label == ExamLabel.UNKNOWN

    def test_schema_violation(self, write_text, schema_doc):
        path = write_text(
            "exams.csv", "exam_id,patient_id,score,label,dataset,scanner\ne1,p1,0.5,cancer,A,HS2\n"
        )
        with pytest.raises(SchemaViolationError) as excinfo:
            parse_exam_scores(path, AttributeSchema.model_validate(schema_doc))
        assert excinfo.value.violations[0].value == "HS2"

    def test_bad_label(self, write_text):
        path = write_text("exams.csv", "exam_id,patient_id,score,label,dataset\ne1,p1,0.5,maybe,A\n")
        with pytest.raises(InputValidationError) as excinfo:
            parse_exam_scores(path)
        assert excinfo.value.column == "label"

    def test_write_then_parse(self, exam_csv, tmp_path):
        exams = parse_exam_scores(exam_csv)
        out = tmp_path / "copy.csv"
        write_exam_scores(exams, out)
        assert parse_exam_scores(out) == exams


def test_aggregate_exams_joins_metadata(write_text):
    images = parse_image_scores(
        write_text(
            "images.csv",
            IMAGE_HEADER + "i1,e1,L,CC,0.2\ni2,e1,L,MLO,0.4\ni3,e1,R,CC,0.1\ni4,e2,R,CC,0.8\n",
        )
    )
    metadata = parse_exam_metadata(
        write_text("meta.csv", "exam_id,patient_id,label,dataset\ne1,p1,cancer,A\ne2,p2,non_cancer,B\n")
    )
    exams = aggregate_exams(images, metadata)
    assert [e.exam_id for e in exams] == ["e1", "e2"]
    assert exams[0].score == pytest.approx(0.3)
    assert exams[1].attributes == {"dataset": "B"}

    per_image = image_level_records(images, metadata)
    assert [r.exam_id for r in per_image] == ["i1", "i2", "i3", "i4"]
    assert per_image[1].attributes == {"dataset": "A", "view": "MLO"}
    assert per_image[3].label == ExamLabel.NON_CANCER


def test_aggregate_exams_unknown_exam(write_text):
    images = parse_image_scores(write_text("images.csv", IMAGE_HEADER + "i1,e9,L,CC,0.2\n"))
    with pytest.raises(InputValidationError, match="e9"):
        aggregate_exams(images, {})


def test_population_summary(exam_csv, schema_doc):
    schema = AttributeSchema.model_validate(schema_doc)
    rows = {(r.attribute, r.value): r for r in population_summary(parse_exam_scores(exam_csv), schema)}
    a = rows[("dataset", "A")]
    assert (a.exams, a.labeled_exams, a.unknown_exams, a.cancers) == (7, 6, 1, 2)
    b = rows[("dataset", "B")]
    assert (b.exams, b.cancers) == (5, 2)
