"""Shared fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from powerspec.config import ExperimentConfig


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep logs and default config files out of the real home directory."""
    home = tmp_path / "home"
    monkeypatch.setenv("POWERSPEC_HOME", str(home))
    monkeypatch.delenv("POWERSPEC_WORKERS", raising=False)
    return home


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def desk_config(tmp_path) -> ExperimentConfig:
    """Small run config writing into a temporary directory."""
    config = ExperimentConfig()
    config.ensemble.n = 16
    config.ensemble.realizations = 200
    config.ensemble.chunk_size = 50
    config.grid.kind = "discrete"
    config.universal.proxy_n = 64
    config.output.directory = str(tmp_path / "out")
    return config
