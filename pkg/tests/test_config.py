"""Tests for TOML config loading, validation and persistence."""

from __future__ import annotations

import pytest

from powerspec.config import (
    ExperimentConfig,
    apply_overrides,
    get_home_dir,
    load_config,
    resolve_workers,
    save_config,
)
from powerspec.errors import ConfigError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoad:
    def test_defaults_without_path(self):
        config = load_config(None)
        assert config == ExperimentConfig()
        assert config.theory.engine == "dpv"
        assert config.ensemble.n == 2048

    def test_partial_file_merges_over_defaults(self, tmp_path):
        path = _write(tmp_path / "run.toml", '[ensemble]\nn = 64\ngenerator = "tcue"\n')
        config = load_config(path)
        assert config.ensemble.n == 64
        assert config.ensemble.generator == "tcue"
        assert config.ensemble.distribution == "exp"
        assert config.grid.kind == "discrete"

    def test_unknown_keys_are_ignored(self, tmp_path, caplog):
        path = _write(tmp_path / "run.toml", "[theory]\ngl_order = 12\nfancy = true\n")
        config = load_config(path)
        assert config.theory.gl_order == 12
        assert "fancy" in caplog.text

    def test_invalid_choice(self, tmp_path):
        path = _write(tmp_path / "run.toml", '[theory]\nengine = "lattice"\n')
        with pytest.raises(ConfigError, match="theory.engine"):
            load_config(path)

    def test_malformed_toml(self, tmp_path):
        path = _write(tmp_path / "run.toml", "[ensemble\nn = 3\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")

    def test_non_positive_size(self, tmp_path):
        path = _write(tmp_path / "run.toml", "[ensemble]\nn = 0\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_out_of_range_knobs_are_clamped(self, tmp_path):
        path = _write(
            tmp_path / "run.toml",
            "[theory]\ngl_order = 200\nendpoint_margin = 0.0001\n"
            "[ensemble]\nworkers = -3\n",
        )
        config = load_config(path)
        assert config.theory.gl_order == 64
        assert config.theory.endpoint_margin == pytest.approx(0.01)
        assert config.ensemble.workers == 0

    def test_exit_code(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_config(tmp_path / "absent.toml")
        assert excinfo.value.exit_code == 2


class TestSave:
    def test_round_trip(self, tmp_path):
        config = ExperimentConfig()
        config.ensemble.n = 128
        config.theory.precision = "double"
        path = tmp_path / "cfg" / "run.toml"
        save_config(config, path)
        assert load_config(path) == config

    def test_existing_file_is_backed_up(self, tmp_path):
        path = tmp_path / "run.toml"
        save_config(ExperimentConfig(), path)
        changed = ExperimentConfig()
        changed.grid.count = 17
        save_config(changed, path)
        assert load_config(path.with_suffix(".toml.bak")).grid.count == 256
        assert load_config(path).grid.count == 17
        assert not path.with_suffix(".toml.tmp").exists()


class TestOverrides:
    def test_dotted_keys(self):
        config = apply_overrides(
            ExperimentConfig(), {"ensemble.n": 32, "grid.kind": "linear", "theory.engine": None}
        )
        assert config.ensemble.n == 32
        assert config.grid.kind == "linear"
        assert config.theory.engine == "dpv"

    def test_top_level_key(self):
        assert apply_overrides(ExperimentConfig(), {"scale": "full"}).scale == "full"

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), {"ensemble.size": 3})

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), {"plot.width": 3})

    def test_revalidates(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), {"output.format": "xlsx"})


class TestEnvironment:
    def test_home_override(self, tmp_path):
        assert get_home_dir() == tmp_path / "home"

    def test_workers_from_env(self, monkeypatch):
        monkeypatch.setenv("POWERSPEC_WORKERS", "3")
        assert resolve_workers(ExperimentConfig()) == 3

    def test_workers_bad_env_falls_back(self, monkeypatch):
        monkeypatch.setenv("POWERSPEC_WORKERS", "many")
        config = ExperimentConfig()
        config.ensemble.workers = 5
        assert resolve_workers(config) == 5

    def test_workers_auto(self, mocker):
        mocker.patch("powerspec.config.os.cpu_count", return_value=6)
        assert resolve_workers(ExperimentConfig()) == 6
