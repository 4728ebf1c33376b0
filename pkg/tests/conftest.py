"""
Shared fixtures: synthetic exam tables, binormal draws and file writers.
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from shortcut_audit.config import BootstrapSettings
from shortcut_audit.models import BinormalSpec
from shortcut_audit.modules.binormal import sample_combined, to_exam_records


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for var in ("SHORTCUT_AUDIT_THREADS", "SHORTCUT_AUDIT_SEED", "SHORTCUT_AUDIT_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def write_text(tmp_path):
    """Write a text file under tmp_path and return its path."""

    def _write(name: str, content: str) -> Path:
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def write_json(tmp_path):
    def _write(name: str, data) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def fast_bootstrap():
    return BootstrapSettings(replicates=200, level=0.95, seed=0)


def make_exams(rows, attribute="dataset"):
    """Exam frame from (score, label, attribute value) triples."""
    return pd.DataFrame(
        {
            "exam_id": [f"e{i}" for i in range(len(rows))],
            "patient_id": [f"p{i}" for i in range(len(rows))],
            "score": [float(r[0]) for r in rows],
            "label": [r[1] for r in rows],
            attribute: [r[2] for r in rows],
        }
    )


def binormal_exams(target=0.7, m=1.0, prev0=0.2, prev1=0.8, n0=3000, n1=3000, seed=0):
    """Two-set binormal draw as an exam frame with attribute set in {set0, set1}."""
    spec = BinormalSpec(
        target_auc=target, bias_m=m, prevalence_set0=prev0, prevalence_set1=prev1,
        n_set0=n0, n_set1=n1, seed=seed,
    )
    return to_exam_records(sample_combined(spec))


@pytest.fixture
def schema_doc():
    return {
        "attributes": [
            {"name": "dataset", "values": ["A", "B"], "high_prevalence_value": "B"},
            {"name": "scanner", "values": ["HS1", "HS3"]},
        ]
    }


@pytest.fixture
def exam_csv(write_text):
    lines = ["exam_id,patient_id,score,label,dataset,scanner"]
    scores = [
        (0.91, "cancer", "B", "HS1"), (0.85, "cancer", "B", "HS3"), (0.40, "cancer", "A", "HS1"),
        (0.62, "cancer", "A", "HS3"), (0.55, "non_cancer", "B", "HS1"), (0.30, "non_cancer", "B", "HS3"),
        (0.20, "non_cancer", "A", "HS1"), (0.35, "non_cancer", "A", "HS3"), (0.10, "non_cancer", "A", "HS1"),
        (0.45, "non_cancer", "A", "HS3"), (0.70, "unknown", "A", "HS1"), (0.25, "non_cancer", "B", "HS1"),
    ]
    for i, (score, label, dataset, scanner) in enumerate(scores):
        lines.append(f"x{i},pt{i // 2},{score},{label},{dataset},{scanner}")
    return write_text("exams.csv", "\n".join(lines) + "\n")
