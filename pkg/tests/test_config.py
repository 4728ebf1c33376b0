"""
Tests for configuration loading, thread resolution and the orchestrator.
"""

import numpy as np
import pytest

from shortcut_audit import ShortcutAudit
from shortcut_audit.config import AuditConfig, load_config
from shortcut_audit.exceptions import InputValidationError
from shortcut_audit.streams import chunked, ordered_map, resolve_threads, stream


class TestLoadConfig:
    def test_packaged_defaults(self):
        config = load_config(dotenv=False)
        assert (config.seed, config.threads, config.log_level) == (0, 1, "INFO")
        assert config.bootstrap.replicates == 10000
        assert config.bootstrap.level == 0.95
        assert config.probe.l2 == 1.0
        assert config.composition.fractions[0] == 0.0 and config.composition.fractions[-1] == 1.0
        assert set(config.simulation.presets) == {"desk", "full"}

    def test_full_preset_axes(self):
        preset = load_config(dotenv=False).preset("full")
        assert len(preset.prevalence_axis.values()) == 90
        assert len(preset.bias_axis.values()) == 101
        assert preset.bias_axis.values()[1] == pytest.approx(0.04)
        assert preset.repetitions == 100
        assert preset.target_aucs == [0.7, 0.8, 0.9]

    def test_unknown_preset(self):
        with pytest.raises(InputValidationError, match="available: \\['desk', 'full'\\], aliases: \\['paper-fig5b'\\]"):
            load_config(dotenv=False).preset("huge")

    def test_alias_resolves_to_full_axes(self):
        config = load_config(dotenv=False)
        assert config.simulation.aliases == {"paper-fig5b": "full"}
        preset = config.preset("paper-fig5b")
        assert preset == config.preset("full")
        assert len(preset.prevalence_axis.values()) == 90
        assert len(preset.bias_axis.values()) == 101

    def test_alias_to_missing_preset(self, write_text):
        path = write_text("audit.yaml", "simulation:\n  aliases:\n    big: huge\n")
        with pytest.raises(InputValidationError, match="unknown preset 'huge'"):
            load_config(path, dotenv=False)

    def test_user_file_merges_over_defaults(self, write_text):
        path = write_text("audit.yaml", "seed: 7\nbootstrap:\n  replicates: 500\n")
        config = load_config(path, dotenv=False)
        assert config.seed == 7
        assert config.bootstrap.replicates == 500
        assert config.bootstrap.level == 0.95

    def test_environment_over_file(self, write_text, monkeypatch):
        monkeypatch.setenv("SHORTCUT_AUDIT_SEED", "11")
        monkeypatch.setenv("SHORTCUT_AUDIT_THREADS", "3")
        monkeypatch.setenv("SHORTCUT_AUDIT_LOG_LEVEL", "debug")
        config = load_config(write_text("audit.yaml", "seed: 7\n"), dotenv=False)
        assert (config.seed, config.threads, config.log_level) == (11, 3, "DEBUG")

    def test_explicit_overrides_win(self, monkeypatch):
        monkeypatch.setenv("SHORTCUT_AUDIT_SEED", "11")
        config = load_config(overrides={"seed": 5, "threads": None, "bootstrap": {"replicates": 10}}, dotenv=False)
        assert config.seed == 5
        assert config.threads == 1
        assert config.bootstrap.replicates == 10

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv("SHORTCUT_AUDIT_SEED", "lots")
        with pytest.raises(InputValidationError, match="SHORTCUT_AUDIT_SEED"):
            load_config(dotenv=False)

    def test_bad_yaml(self, write_text):
        path = write_text("audit.yaml", "seed: [1, 2\n")
        with pytest.raises(InputValidationError) as excinfo:
            load_config(path, dotenv=False)
        assert excinfo.value.path == str(path)

    def test_non_mapping_yaml(self, write_text):
        with pytest.raises(InputValidationError, match="mapping"):
            load_config(write_text("audit.yaml", "- 1\n- 2\n"), dotenv=False)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputValidationError, match="not found"):
            load_config(tmp_path / "absent.yaml", dotenv=False)

    @pytest.mark.parametrize(
        "content",
        [
            "bootstrap:\n  level: 1.5\n",
            "seed: -1\n",
            "composition:\n  fractions: [0.0, 1.2]\n",
            "simulation:\n  presets:\n    desk:\n      size_range: [100, 10]\n",
        ],
    )
    def test_invalid_values(self, write_text, content):
        with pytest.raises(InputValidationError, match="invalid configuration"):
            load_config(write_text("audit.yaml", content), dotenv=False)

    def test_bootstrap_settings_carry_run_seed(self):
        config = load_config(overrides={"seed": 9, "threads": 2}, dotenv=False)
        settings = config.bootstrap_settings(replicates=50, level=None)
        assert (settings.seed, settings.threads, settings.replicates, settings.level) == (9, 2, 50, 0.95)

    def test_module_config_sections(self):
        config = load_config(overrides={"seed": 3}, dotenv=False)
        assert config.module_config("mitigation") == {"seed": 3}
        assert config.module_config("audit")["bootstrap"]["seed"] == 3
        assert config.module_config("nothing") == {}


class TestStreams:
    def test_same_key_same_draws(self):
        np.testing.assert_array_equal(stream(4, 1, 2).random(5), stream(4, 1, 2).random(5))

    def test_keys_are_independent(self):
        assert not np.array_equal(stream(4, 1, 2).random(5), stream(4, 2, 1).random(5))
        assert not np.array_equal(stream(4, 1).random(5), stream(5, 1).random(5))

    def test_negative_key(self):
        with pytest.raises(InputValidationError):
            stream(0, -1)

    def test_threads_default(self):
        assert resolve_threads() == 1
        assert resolve_threads(6) == 6

    def test_threads_capped_by_environment(self, monkeypatch):
        monkeypatch.setenv("SHORTCUT_AUDIT_THREADS", "2")
        assert resolve_threads(8) == 2
        assert resolve_threads(1) == 1
        assert resolve_threads() == 2

    def test_threads_bad_environment(self, monkeypatch):
        monkeypatch.setenv("SHORTCUT_AUDIT_THREADS", "many")
        with pytest.raises(InputValidationError, match="must be an integer"):
            resolve_threads(4)

    @pytest.mark.parametrize("threads", [1, 3])
    def test_ordered_map_keeps_order(self, threads):
        assert ordered_map(lambda i: i * i, list(range(20)), threads=threads) == [i * i for i in range(20)]

    def test_chunked(self):
        assert chunked(range(5), 2) == [[0, 1], [2, 3], [4]]


class TestShortcutAudit:
    def test_modules(self):
        app = ShortcutAudit(load_config(overrides={"seed": 2}, dotenv=False))
        assert app.get_module("mitigation") is app.mitigation
        assert app.mitigation.seed == 2
        info = app.get_all_modules_info()
        assert set(info) == {"ingestion", "metrics", "binormal", "audit", "probe", "mitigation"}
        assert "prevalence_matched_eval" in info["mitigation"]["operations"]

    def test_unknown_module(self):
        with pytest.raises(ValueError, match="Available modules"):
            ShortcutAudit().get_module("chat")

    def test_default_config(self):
        assert isinstance(ShortcutAudit().config, AuditConfig)
