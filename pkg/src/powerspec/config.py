"""Run configuration persistence (TOML) and config schema."""

from __future__ import annotations

import logging
import os
import shutil
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli_w

from powerspec.errors import ConfigError

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

COMMANDS = ("simulate", "theory", "universal", "compare", "verify", "figures")
GENERATORS = ("uncorrelated", "cue", "tcue")
DISTRIBUTIONS = ("exp", "erlang", "inverse-gaussian", "uniform", "deterministic")
GRID_KINDS = ("discrete", "linear", "tau-log", "tau-linear")
ENGINES = ("dpv", "toeplitz")
PRECISIONS = ("double", "extended")
FORMATS = ("json", "csv", "both")
SCALES = ("desk", "full")


@dataclass
class EnsembleConfig:
    generator: str = "uncorrelated"
    distribution: str = "exp"
    n: int = 2048
    realizations: int = 100_000
    seed: int = 20240917
    chunk_size: int = 1000  # realizations per deterministic work item
    workers: int = 0  # 0 = os.cpu_count()
    levels_file: str = ""  # CSV of levels, one realization per row; empty = generate


@dataclass
class GridConfig:
    # "discrete": omega_k = 2 pi k / N for k = 1..N/2 (count ignored)
    kind: str = "discrete"
    count: int = 256
    start: float = 0.0
    stop: float = 0.0  # 0 = pi for frequency grids, 2 for tau grids


@dataclass
class TheoryConfig:
    engine: str = "dpv"
    precision: str = "extended"
    gl_order: int = 16
    panels_per_spacing: float = 1.0
    panels_per_period: float = 1.0
    endpoint_margin: float = 0.2  # delta_end = endpoint_margin / N
    quad_tolerance: float = 1e-8
    series_tolerance: float = 1e-10


@dataclass
class UniversalConfig:
    proxy_n: int = 10_000
    tolerance: float = 1e-3


@dataclass
class OutputConfig:
    directory: str = "."
    stem: str = ""  # empty = derived from the command
    format: str = "both"
    save_ensemble: bool = False


@dataclass
class ExperimentConfig:
    command: str = "simulate"
    scale: str = "desk"
    allow_long_run: bool = False
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    theory: TheoryConfig = field(default_factory=TheoryConfig)
    universal: UniversalConfig = field(default_factory=UniversalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _clamp_float(value: float, min_val: float, max_val: float) -> float:
    """Clamp a float value to the specified range."""
    return max(min_val, min(max_val, value))


def _clamp_int(value: int, min_val: int, max_val: int) -> int:
    """Clamp an int value to the specified range."""
    return max(min_val, min(max_val, value))


def get_home_dir() -> Path:
    """Return the powerspec state directory (``$POWERSPEC_HOME`` or ~/.powerspec)."""
    override = os.environ.get("POWERSPEC_HOME")
    if override:
        return Path(override)
    return Path.home() / ".powerspec"


def _merge_into_dataclass(cls: type, data: dict) -> Any:
    """Create a dataclass instance from *data*, ignoring unknown keys."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        logger.warning("Ignoring unknown %s keys: %s", cls.__name__, ", ".join(unknown))
    try:
        return cls(**{k: v for k, v in data.items() if k in known})
    except TypeError as e:
        raise ConfigError(f"Invalid {cls.__name__} section: {e}") from e


def _deep_merge(defaults: dict, overrides: dict) -> dict:
    """Recursively merge *overrides* into *defaults* (non-destructive)."""
    merged = defaults.copy()
    for key, value in overrides.items():
        if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _check_choice(name: str, value: str, choices: tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigError(
            f"Invalid {name} value '{value}'. Valid values are: {', '.join(choices)}."
        )


def _dict_to_config(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a plain dict (e.g. parsed TOML)."""
    ensemble = _merge_into_dataclass(EnsembleConfig, data.get("ensemble", {}))
    grid = _merge_into_dataclass(GridConfig, data.get("grid", {}))
    theory = _merge_into_dataclass(TheoryConfig, data.get("theory", {}))
    universal = _merge_into_dataclass(UniversalConfig, data.get("universal", {}))
    output = _merge_into_dataclass(OutputConfig, data.get("output", {}))

    config = ExperimentConfig(
        command=data.get("command", "simulate"),
        scale=data.get("scale", "desk"),
        allow_long_run=bool(data.get("allow_long_run", False)),
        ensemble=ensemble,
        grid=grid,
        theory=theory,
        universal=universal,
        output=output,
    )
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    """Reject invalid choices and clamp out-of-range tuning knobs in place.

    Raises:
        ConfigError: If an enumerated value is unknown or a size is not positive.
    """
    _check_choice("command", config.command, COMMANDS)
    _check_choice("scale", config.scale, SCALES)
    _check_choice("ensemble.generator", config.ensemble.generator, GENERATORS)
    _check_choice("ensemble.distribution", config.ensemble.distribution, DISTRIBUTIONS)
    _check_choice("grid.kind", config.grid.kind, GRID_KINDS)
    _check_choice("theory.engine", config.theory.engine, ENGINES)
    _check_choice("theory.precision", config.theory.precision, PRECISIONS)
    _check_choice("output.format", config.output.format, FORMATS)

    if config.ensemble.n < 1:
        raise ConfigError(f"ensemble.n must be >= 1, got {config.ensemble.n}")
    if config.ensemble.realizations < 1:
        raise ConfigError(
            f"ensemble.realizations must be >= 1, got {config.ensemble.realizations}"
        )

    theory = config.theory
    if not 4 <= theory.gl_order <= 64:
        logger.warning("theory.gl_order %d out of range [4, 64]. Clamping.", theory.gl_order)
        theory.gl_order = _clamp_int(theory.gl_order, 4, 64)
    if not 0.25 <= theory.panels_per_spacing <= 16.0:
        logger.warning(
            "theory.panels_per_spacing %.2f out of range [0.25, 16]. Clamping.",
            theory.panels_per_spacing,
        )
        theory.panels_per_spacing = _clamp_float(theory.panels_per_spacing, 0.25, 16.0)
    if not 0.5 <= theory.panels_per_period <= 16.0:
        logger.warning(
            "theory.panels_per_period %.2f out of range [0.5, 16]. Clamping.",
            theory.panels_per_period,
        )
        theory.panels_per_period = _clamp_float(theory.panels_per_period, 0.5, 16.0)
    if not 0.01 <= theory.endpoint_margin <= 2.0:
        logger.warning(
            "theory.endpoint_margin %.3f out of range [0.01, 2]. Clamping.",
            theory.endpoint_margin,
        )
        theory.endpoint_margin = _clamp_float(theory.endpoint_margin, 0.01, 2.0)

    ensemble = config.ensemble
    if not 1 <= ensemble.chunk_size <= 1_000_000:
        logger.warning("ensemble.chunk_size %d out of range. Clamping.", ensemble.chunk_size)
        ensemble.chunk_size = _clamp_int(ensemble.chunk_size, 1, 1_000_000)
    if ensemble.workers < 0:
        logger.warning("ensemble.workers %d is negative. Using 0 (auto).", ensemble.workers)
        ensemble.workers = 0

    if config.universal.proxy_n < 1000:
        logger.warning(
            "universal.proxy_n=%d is below 1000; the finite-N proxy error is not negligible.",
            config.universal.proxy_n,
        )


def config_to_dict(config: ExperimentConfig) -> dict:
    """Convert an ExperimentConfig to a plain dict suitable for TOML/JSON."""
    return asdict(config)


def resolve_workers(config: ExperimentConfig) -> int:
    """Return the worker count: ``$POWERSPEC_WORKERS``, then config, then cpu count."""
    env = os.environ.get("POWERSPEC_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("Ignoring non-integer POWERSPEC_WORKERS=%r", env)
    if config.ensemble.workers > 0:
        return config.ensemble.workers
    return os.cpu_count() or 1


def apply_overrides(config: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """Apply dotted-key overrides (e.g. ``{"ensemble.n": 256}``) and revalidate.

    ``None`` values are skipped so unset command-line flags leave the file value.
    """
    data = config_to_dict(config)
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.rpartition(".")
        target = data
        if section:
            if section not in target or not isinstance(target[section], dict):
                raise ConfigError(f"Unknown config section '{section}'")
            target = target[section]
        if key not in target:
            raise ConfigError(f"Unknown config key '{dotted}'")
        target[key] = value
    return _dict_to_config(data)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Load a run config from *path*, merged over defaults.

    ``None`` returns the defaults.

    Raises:
        ConfigError: If the file cannot be read or parsed, or holds invalid values.
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        with open(path, "rb") as f:
            file_data = tomllib.load(f)
    except (tomllib.TOMLDecodeError, OSError) as e:
        raise ConfigError(f"Failed to load config from {path}: {e}") from e

    default_data = config_to_dict(ExperimentConfig())
    merged = _deep_merge(default_data, file_data)
    logger.debug("Loaded config from %s", path)
    return _dict_to_config(merged)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    """Save *config* to *path* as TOML.

    Writes to a temporary file first and swaps it in; an existing file is
    kept as ``<name>.bak``.

    Raises:
        OSError: If the config file cannot be written. The backup file
            is preserved for recovery.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    backup_path = path.with_suffix(path.suffix + ".bak")
    if path.exists():
        shutil.copy2(path, backup_path)

    data = config_to_dict(config)
    try:
        temp_path = path.with_suffix(path.suffix + ".tmp")
        with open(temp_path, "wb") as f:
            tomli_w.dump(data, f)
        temp_path.replace(path)
    except Exception:
        if backup_path.exists():
            shutil.copy2(backup_path, path)
        raise
