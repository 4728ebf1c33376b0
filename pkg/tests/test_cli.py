"""
End-to-end tests of the shortcut-audit command line.
"""

import json
import logging

import pandas as pd
import pytest
from click.testing import CliRunner

from shortcut_audit.cli import cli

TINY_PRESET = """
simulation:
  presets:
    tiny:
      target_aucs: [0.7]
      set0_prevalence: 0.2
      prevalence_axis: {start: 0.1, stop: 0.9, num: 3}
      bias_axis: {start: 0.0, stop: 2.0, num: 2}
      size_range: [200, 400]
      repetitions: 2
      m_values: [0.0, 1.0]
      p_axis: {start: 0.0, stop: 1.0, num: 3}
      p0p1_size_range: [200, 400]
composition:
  fractions: [0.0, 0.5, 1.0]
  subsets_per_point: 2
"""


@pytest.fixture(autouse=True)
def _restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def run():
    runner = CliRunner()

    def _run(*args):
        return runner.invoke(cli, ["--log-level", "WARNING", *[str(a) for a in args]])

    return _run


@pytest.fixture
def config_file(write_text):
    return write_text("audit.yaml", TINY_PRESET)


@pytest.fixture
def schema_file(write_json, schema_doc):
    return write_json("schema.json", schema_doc)


class TestAudit:
    def test_writes_every_output(self, run, exam_csv, schema_file, config_file, tmp_path):
        out = tmp_path / "audit"
        result = run(
            "--config", config_file, "audit", "--predictions", exam_csv, "--schema", schema_file,
            "--out", out, "--bootstrap", 50, "--seed", 3,
        )
        assert result.exit_code == 0, result.output
        for name in (
            "report.json", "report.schema.json", "manifest.json", "report.md",
            "prevalence.csv", "distribution.csv", "composition.csv", "population.csv",
        ):
            assert (out / name).exists(), name

        document = json.loads((out / "report.json").read_text())
        assert [r["attribute"] for r in document["reports"]] == ["dataset", "scanner"]
        assert document["schema_value_order"]["dataset"] == ["A", "B"]
        assert document["manifest"]["created_at"] is None
        assert document["manifest"]["seed"] == 3
        assert document["manifest"]["parameters"]["bootstrap"]["replicates"] == 50
        assert json.loads((out / "manifest.json").read_text())["created_at"] is not None

        prevalence = pd.read_csv(out / "prevalence.csv")
        assert set(prevalence["attribute"]) == {"dataset", "scanner"}
        composition = pd.read_csv(out / "composition.csv")
        assert sorted(set(composition["fraction"])) == [0.0, 0.5, 1.0]

    def test_rerun_is_byte_identical(self, run, exam_csv, schema_file, config_file, tmp_path):
        for name in ("first", "second"):
            result = run(
                "--config", config_file, "audit", "--predictions", exam_csv, "--schema", schema_file,
                "--attribute", "dataset", "--out", tmp_path / name, "--bootstrap", 30,
            )
            assert result.exit_code == 0, result.output
        for name in ("report.json", "report.md", "composition.csv"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    def test_high_value_and_within(self, run, exam_csv, schema_file, config_file, tmp_path):
        result = run(
            "--config", config_file, "audit", "--predictions", exam_csv, "--schema", schema_file,
            "--attribute", "dataset", "--high-value", "A", "--within", "scanner",
            "--out", tmp_path / "out", "--bootstrap", 30,
        )
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "out" / "report.json").read_text())["reports"][0]
        assert report["bias_gap"]["high_value"] == "A"
        assert report["bias_gap"]["high_value_source"] == "argument"
        assert len(report["composition_within"]) == 2

    def test_missing_schema(self, run, exam_csv, tmp_path):
        result = run("audit", "--predictions", exam_csv, "--schema", tmp_path / "absent.json", "--out", tmp_path / "out")
        assert result.exit_code == 2
        assert "schema file not found" in result.output

    def test_unknown_attribute(self, run, exam_csv, schema_file, tmp_path):
        result = run(
            "audit", "--predictions", exam_csv, "--schema", schema_file,
            "--attribute", "vendor", "--out", tmp_path / "out",
        )
        assert result.exit_code == 2
        assert "'vendor' not in schema" in result.output

    def test_schema_violation(self, run, write_text, schema_file, tmp_path):
        path = write_text(
            "bad.csv",
            "exam_id,patient_id,score,label,dataset,scanner\nx0,p0,0.5,cancer,C,HS1\nx1,p1,0.2,non_cancer,A,HS1\n",
        )
        result = run("audit", "--predictions", path, "--schema", schema_file, "--out", tmp_path / "out")
        assert result.exit_code == 2

    def test_malformed_row_reports_line(self, run, write_text, schema_file, tmp_path):
        path = write_text(
            "bad.csv",
            "exam_id,patient_id,score,label,dataset,scanner\nx0,p0,0.5,cancer,A,HS1\nx1,p1,high,non_cancer,A,HS1\n",
        )
        result = run("audit", "--predictions", path, "--schema", schema_file, "--out", tmp_path / "out")
        assert result.exit_code == 2
        assert f"{path}:3: column 'score'" in result.output


class TestSimulate:
    def test_prevalence_bias(self, run, config_file, tmp_path):
        out = tmp_path / "sim"
        result = run("--config", config_file, "simulate", "--preset", "tiny", "--out", out, "--seed", 1)
        assert result.exit_code == 0, result.output
        grid = pd.read_csv(out / "grid.csv")
        assert len(grid) == 6
        assert {"target_auc", "bias", "prevalence", "mean_delta", "std_delta", "repetitions"} <= set(grid.columns)
        document = json.loads((out / "report.json").read_text())
        assert document["grid"]["mode"] == "prevalence-bias"
        assert document["grid"]["crossing_axis"] == "prevalence"
        assert (out / "zero_crossings.csv").exists()
        assert not (out / "analytic.csv").exists()

    def test_p0p1_writes_analytic_grid(self, run, config_file, tmp_path):
        out = tmp_path / "sim"
        result = run(
            "--config", config_file, "simulate", "--mode", "p0p1", "--preset", "tiny",
            "--m", "0,1", "--repetitions", 1, "--out", out,
        )
        assert result.exit_code == 0, result.output
        grid = pd.read_csv(out / "grid.csv")
        analytic = pd.read_csv(out / "analytic.csv")
        assert len(grid) == len(analytic) == 18
        assert set(grid["repetitions"]) == {1}
        unbiased = analytic[analytic["m"] == 0.0]
        assert unbiased["mean_delta"].abs().max() == pytest.approx(0.0, abs=1e-12)

    def test_target_auc_one_rejected(self, run, config_file, tmp_path):
        result = run("--config", config_file, "simulate", "--preset", "tiny", "--target-auc", "1.0", "--out", tmp_path / "sim")
        assert result.exit_code == 2
        assert "open interval" in result.output

    def test_m_needs_p0p1_mode(self, run, config_file, tmp_path):
        result = run("--config", config_file, "simulate", "--preset", "tiny", "--m", "1", "--out", tmp_path / "sim")
        assert result.exit_code == 2

    def test_alias_runs_full_axes(self, run, write_text, tmp_path):
        config = write_text(
            "small_full.yaml",
            "simulation:\n  presets:\n    full:\n      size_range: [100, 100]\n      repetitions: 1\n",
        )
        out = tmp_path / "sim"
        result = run(
            "--config", config, "simulate", "--preset", "paper-fig5b", "--target-auc", "0.7", "--out", out,
        )
        assert result.exit_code == 0, result.output
        grid = pd.read_csv(out / "grid.csv")
        assert len(grid) == 90 * 101
        assert grid["prevalence"].nunique() == 90
        assert grid["bias"].nunique() == 101
        document = json.loads((out / "report.json").read_text())
        assert document["manifest"]["parameters"]["preset"] == "paper-fig5b"
        assert document["manifest"]["parameters"]["settings"]["prevalence_axis"]["num"] == 90

    def test_unknown_preset(self, run, tmp_path):
        result = run("simulate", "--preset", "huge", "--out", tmp_path / "sim")
        assert result.exit_code == 2
        assert "unknown simulation preset" in result.output

    def test_bad_float_list(self, run, tmp_path):
        result = run("simulate", "--target-auc", "0.7,high", "--out", tmp_path / "sim")
        assert result.exit_code == 2


class TestProbe:
    @staticmethod
    def features(write_text, name, n, offset):
        lines = ["id,attribute_label,f0,f1"]
        for i in range(n):
            label = i % 2
            lines.append(f"{name}{i},{label},{label * 2.0 + ((i * 7 + offset) % 5) / 5},{((i * 3) % 7) / 7}")
        return write_text(f"{name}.csv", "\n".join(lines) + "\n")

    def test_train_and_evaluate(self, run, write_text, tmp_path):
        train = self.features(write_text, "train", 60, 0)
        test = self.features(write_text, "test", 40, 1)
        out = tmp_path / "probe"
        result = run("probe", "--train", train, "--test", test, "--out", out, "--bootstrap", 50, "--iterations", 100)
        assert result.exit_code == 0, result.output
        document = json.loads((out / "report.json").read_text())
        assert document["report"]["auc"]["ci"]["point"] > 0.9
        assert document["report"]["n_train"] == 60
        assert document["manifest"]["parameters"]["probe"]["iterations"] == 100
        scores = pd.read_csv(out / "probe_scores.csv")
        assert list(scores.columns) == ["id", "attribute_label", "score"]
        assert len(scores) == 40
        assert (out / "report.md").exists()

    def test_missing_file(self, run, write_text, tmp_path):
        train = self.features(write_text, "train", 10, 0)
        result = run("probe", "--train", train, "--test", tmp_path / "absent.csv", "--out", tmp_path / "probe")
        assert result.exit_code == 2


class TestDataCommands:
    def test_balance(self, run, exam_csv, schema_file, tmp_path):
        out = tmp_path / "weights.csv"
        result = run("balance", "--predictions", exam_csv, "--attribute", "dataset", "--schema", schema_file, "--out", out)
        assert result.exit_code == 0, result.output
        weights = pd.read_csv(out)
        assert len(weights) == 11
        assert weights["weight"].sum() == pytest.approx(1.0)
        sidecar = json.loads((tmp_path / "weights.json").read_text())
        assert sidecar["reference_draws"] == 10000
        assert sidecar["manifest"]["command"] == "balance"

    def test_balance_without_schema(self, run, exam_csv, tmp_path):
        result = run("balance", "--predictions", exam_csv, "--attribute", "scanner", "--out", tmp_path / "w.csv")
        assert result.exit_code == 0, result.output

    def test_label(self, run, write_text, tmp_path):
        history = write_text(
            "history.jsonl",
            '{"exam_id": "e1", "exam_date": "2020-01-01", "exam_birads": 4, '
            '"biopsies": [{"date": "2020-02-01", "outcome": "malignant"}], "followups": []}\n'
            '{"exam_id": "e2", "exam_date": "2020-01-01", "exam_birads": 1, '
            '"biopsies": [], "followups": [{"date": "2022-02-01", "birads": 1}]}\n'
            '{"exam_id": "e3", "exam_date": "2020-01-01", "exam_birads": 2}\n',
        )
        out = tmp_path / "labels.csv"
        result = run("label", "--history", history, "--out", out)
        assert result.exit_code == 0, result.output
        labels = pd.read_csv(out)
        assert list(labels["label"]) == ["cancer", "non_cancer", "unknown"]
        assert json.loads((tmp_path / "labels.manifest.json").read_text())["command"] == "label"

    def test_aggregate(self, run, write_text, tmp_path):
        images = write_text(
            "images.csv",
            "image_id,exam_id,laterality,view,score\n"
            "i1,e1,L,CC,0.2\ni2,e1,L,MLO,0.4\ni3,e1,R,CC,0.5\ni4,e2,R,MLO,0.1\n",
        )
        metadata = write_text("meta.csv", "exam_id,patient_id,label,dataset\ne1,p1,cancer,A\ne2,p2,non_cancer,B\n")
        out = tmp_path / "exams.csv"
        result = run("aggregate", "--images", images, "--metadata", metadata, "--out", out)
        assert result.exit_code == 0, result.output
        exams = pd.read_csv(out)
        assert list(exams.columns[:4]) == ["exam_id", "patient_id", "score", "label"]
        assert list(exams["score"]) == pytest.approx([0.5, 0.1])
        assert list(exams["dataset"]) == ["A", "B"]

        image_out = tmp_path / "images_out.csv"
        result = run("aggregate", "--images", images, "--metadata", metadata, "--image-level", "--out", image_out)
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(image_out)) == 4

    def test_filter(self, run, exam_csv, tmp_path):
        out = tmp_path / "screening.csv"
        result = run("filter", "--predictions", exam_csv, "--attribute", "dataset", "--keep", "B", "--out", out)
        assert result.exit_code == 0, result.output
        kept = pd.read_csv(out)
        assert set(kept["dataset"]) == {"B"}
        assert len(kept) == 5
        manifest = json.loads((tmp_path / "screening.manifest.json").read_text())
        assert (manifest["parameters"]["kept"], manifest["parameters"]["removed"]) == (5, 7)

    def test_filter_unknown_column(self, run, exam_csv, tmp_path):
        result = run("filter", "--predictions", exam_csv, "--attribute", "vendor", "--keep", "x", "--out", tmp_path / "f.csv")
        assert result.exit_code == 2

    def test_match(self, run, exam_csv, tmp_path):
        out = tmp_path / "matched.csv"
        result = run("match", "--predictions", exam_csv, "--attribute", "dataset", "--target", 0.4, "--seed", 2, "--out", out)
        assert result.exit_code == 0, result.output
        matched = pd.read_csv(out)
        assert (matched["label"] != "unknown").all()
        assert set(matched["exam_id"]) <= {f"x{i}" for i in range(12)}

    def test_match_bad_target(self, run, exam_csv, tmp_path):
        result = run("match", "--predictions", exam_csv, "--attribute", "dataset", "--target", 1.0, "--out", tmp_path / "m.csv")
        assert result.exit_code == 2

    def test_match_unreachable_target(self, run, exam_csv, tmp_path):
        result = run("match", "--predictions", exam_csv, "--attribute", "dataset", "--target", 0.95, "--out", tmp_path / "m.csv")
        assert result.exit_code == 1
        assert "feasible range" in result.output

    def test_schema_documents(self, run, tmp_path):
        result = run("schema", "--out", tmp_path / "schemas")
        assert result.exit_code == 0, result.output
        written = sorted(p.name for p in (tmp_path / "schemas").iterdir())
        assert "audit.schema.json" in written
        assert "weights.schema.json" in written
        assert json.loads((tmp_path / "schemas" / "audit.schema.json").read_text())["title"] == "AuditDocument"


def test_version(run):
    result = run("--version")
    assert result.exit_code == 0
    assert "1.0.0" in result.output
