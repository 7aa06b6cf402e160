"""Command implementations: simulate, theory, universal, compare, verify, figures.

Each command takes a resolved :class:`~powerspec.config.ExperimentConfig`,
does its work through the library modules and writes its outputs with
:mod:`powerspec.datafiles`.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from powerspec.baselines import (
    Regime,
    form_factor_exact,
    form_factor_scaling,
    get_distribution,
    s_uncorrelated_exact,
)
from powerspec.config import EnsembleConfig, ExperimentConfig, GridConfig, config_to_dict
from powerspec.datafiles import (
    read_curve,
    read_levels,
    write_curve,
    write_levels,
    write_report,
    write_table,
)
from powerspec.dpv import diagnose, endpoint_window
from powerspec.errors import ComparisonFailed, DataError, DomainError, UsageError
from powerspec.generators import sample_ensemble
from powerspec.spectra import (
    FormFactorFeatures,
    FourierFeatures,
    Provenance,
    Quantity,
    SpectrumAccumulator,
    SpectrumCurve,
    accumulate,
    discrete_frequencies,
)
from powerspec.theory import s_tcue_curve
from powerspec.universal import s_infinity_curve, s_small_omega
from powerspec.verify import SuiteReport, run_suite
from powerspec.workers import map_ordered

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi

# ---------------------------------------------------------------------------
# Grids and outputs
# ---------------------------------------------------------------------------


def grid_quantity(grid: GridConfig) -> Quantity:
    return Quantity.FORM_FACTOR if grid.kind.startswith("tau") else Quantity.POWER_SPECTRUM


def build_grid(grid: GridConfig, n: int) -> np.ndarray:
    """Frequency grid in (0, π] or time grid τ > 0 described by *grid*.

    Raises:
        UsageError: If the bounds are not increasing or leave the domain.
    """
    if grid.kind == "discrete":
        return discrete_frequencies(n)
    if grid.kind == "linear":
        start = grid.start or np.pi / grid.count
        stop = grid.stop or np.pi
    else:
        start = grid.start or 1.0 / n
        stop = grid.stop or 2.0
    if not 0.0 < start < stop:
        raise UsageError(f"Grid bounds must satisfy 0 < start < stop, got [{start}, {stop}]")
    if grid.kind == "linear" and stop > np.pi:
        raise UsageError(f"Frequency grid must end at or below pi, got {stop}")
    if grid.count < 2:
        raise UsageError(f"grid.count must be >= 2, got {grid.count}")
    if grid.kind == "tau-log":
        return np.geomspace(start, stop, grid.count)
    return np.linspace(start, stop, grid.count)


def output_stem(config: ExperimentConfig, default: str) -> Path:
    return Path(config.output.directory) / (config.output.stem or default)


def _write_columns(
    config: ExperimentConfig, stem: Path, columns: dict, kind: str, meta: dict
) -> list[Path]:
    fmt = config.output.format
    suffixes = [".json", ".csv"] if fmt == "both" else [f".{fmt}"]
    resolved = config_to_dict(config)
    return [
        write_table(stem.with_name(stem.name + s), columns, kind, meta, resolved)
        for s in suffixes
    ]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _chunks(total: int, size: int) -> list[tuple[int, int]]:
    return [(first, min(size, total - first)) for first in range(0, total, size)]


def simulate_curve(
    ensemble: EnsembleConfig,
    grid: np.ndarray,
    quantity: Quantity,
    workers: int = 1,
    levels: np.ndarray | None = None,
) -> SpectrumCurve:
    """Stream an ensemble through the estimator in fixed chunks merged in order.

    With *levels* (an (R, N) array of unfolded sequences) the chunks are cut
    from it instead of being generated; R and N then come from its shape.

    Raises:
        InsufficientDataError: With fewer than 2 realizations.
    """
    if levels is not None:
        ensemble = replace(
            ensemble, generator="external", n=levels.shape[1], realizations=levels.shape[0]
        )
    grid = np.asarray(grid, dtype=float)
    if quantity is Quantity.FORM_FACTOR:
        features: Callable = FormFactorFeatures(grid)
    else:
        features = FourierFeatures(ensemble.n, grid)
    total = ensemble.realizations

    def work(chunk: tuple[int, int]) -> SpectrumAccumulator:
        first, count = chunk
        if levels is None:
            block = sample_ensemble(ensemble, chunk)
        else:
            block = levels[first : first + count]
        return accumulate(block, features, first, total, grid.size)

    logger.info(
        "Simulating %s: N=%d, R=%d, %d grid points, %d workers",
        ensemble.generator, ensemble.n, total, grid.size, workers,
    )
    started = time.monotonic()
    merged = SpectrumAccumulator(grid.size)
    chunks = _chunks(total, ensemble.chunk_size)
    batch = max(1, workers) * 4
    for start in range(0, len(chunks), batch):
        for acc in map_ordered(work, chunks[start : start + batch], workers):
            merged.merge(acc)
        logger.debug("Merged %d/%d chunks", min(start + batch, len(chunks)), len(chunks))

    values = merged.variance()
    stderr = merged.stderr()
    if quantity is Quantity.FORM_FACTOR:
        values = values / ensemble.n
        stderr = None if stderr is None else stderr / ensemble.n
    logger.info("Simulation finished in %.1f s", time.monotonic() - started)
    meta = {"n": ensemble.n, "r": total, "generator": ensemble.generator}
    if levels is None:
        meta.update(distribution=ensemble.distribution, seed=ensemble.seed)
    return SpectrumCurve(
        x=grid,
        values=values,
        stderr=stderr,
        provenance=Provenance.MONTE_CARLO,
        quantity=quantity,
        meta=meta,
    )


def cmd_simulate(config: ExperimentConfig, workers: int = 1) -> list[Path]:
    """Monte Carlo power spectrum or form factor with batch-means error bars.

    ``ensemble.levels_file`` replaces the generator by sequences read from CSV.
    ``output.save_ensemble`` also writes the generated levels next to the curve.

    Raises:
        UsageError: If an external ensemble is combined with ``save_ensemble``.
    """
    ensemble = config.ensemble
    levels = None
    if ensemble.levels_file:
        if config.output.save_ensemble:
            raise UsageError("save_ensemble only applies to generated ensembles")
        levels, _ = read_levels(ensemble.levels_file)
        logger.info("Loaded %d realizations of N=%d from %s", *levels.shape, ensemble.levels_file)
        ensemble = replace(ensemble, n=levels.shape[1], realizations=levels.shape[0])

    grid = build_grid(config.grid, ensemble.n)
    curve = simulate_curve(ensemble, grid, grid_quantity(config.grid), workers, levels)
    if levels is not None:
        curve.meta["levels_file"] = str(ensemble.levels_file)
    stem = output_stem(config, f"simulate-{curve.meta['generator']}-n{ensemble.n}")
    paths = write_curve(curve, stem, config.output.format, config_to_dict(config))
    if config.output.save_ensemble:
        blocks = (
            sample_ensemble(ensemble, chunk)
            for chunk in _chunks(ensemble.realizations, ensemble.chunk_size)
        )
        meta = {"n": ensemble.n, "r": ensemble.realizations, "generator": ensemble.generator}
        paths.append(
            write_levels(
                stem.with_name(stem.name + ".levels.csv"), blocks, meta, config_to_dict(config)
            )
        )
    return paths


# ---------------------------------------------------------------------------
# Theory
# ---------------------------------------------------------------------------


def baseline_curve(config: ExperimentConfig, grid: np.ndarray) -> SpectrumCurve:
    """Exact uncorrelated-spacings curve on *grid* for the configured distribution."""
    n = config.ensemble.n
    dist = get_distribution(config.ensemble.distribution)
    quantity = grid_quantity(config.grid)
    if quantity is Quantity.FORM_FACTOR:
        values = form_factor_exact(n, grid, dist)
    else:
        values = s_uncorrelated_exact(n, grid, dist.variance)
    return SpectrumCurve(
        x=grid,
        values=np.atleast_1d(values),
        provenance=Provenance.EXACT_BASELINE,
        quantity=quantity,
        meta={"n": n, "distribution": dist.name, "variance": dist.variance},
    )


def _diagnostics_report(config: ExperimentConfig, omegas: np.ndarray) -> dict:
    n = config.ensemble.n
    delta = endpoint_window(n, config.theory.endpoint_margin)
    phis = np.linspace(delta, _TWO_PI - delta, 7)[1:-1]
    runs = []
    for omega in omegas:
        diag = diagnose(n, phis, complex(1.0 - np.exp(1j * omega)), config.theory.precision)
        runs.append({"omega": float(omega), "phis": phis.tolist(), **diag.to_dict()})
    return {"n": n, "runs": runs}


def cmd_theory(
    config: ExperimentConfig, workers: int = 1, diagnostics: bool = False
) -> list[Path]:
    """Exact theory curve: uncorrelated baseline or finite-N TCUE spectrum."""
    n = config.ensemble.n
    grid = build_grid(config.grid, n)
    if config.ensemble.generator == "uncorrelated":
        curve = baseline_curve(config, grid)
    else:
        if grid_quantity(config.grid) is Quantity.FORM_FACTOR:
            raise UsageError("TCUE theory is available for the power spectrum only")
        curve = s_tcue_curve(n, grid, config.theory, workers)
    stem = output_stem(config, f"theory-{config.ensemble.generator}-n{n}")
    paths = write_curve(curve, stem, config.output.format, config_to_dict(config))
    if diagnostics and curve.provenance is Provenance.TCUE_THEORY:
        report = _diagnostics_report(config, grid)
        paths.append(write_report(stem.with_name(stem.name + ".diagnostics.json"), report))
    return paths


def cmd_universal(config: ExperimentConfig, workers: int = 1) -> list[Path]:
    """Large-N proxy of S_∞ with δS_∞ and the small-ω reference."""
    if grid_quantity(config.grid) is Quantity.FORM_FACTOR:
        raise UsageError("The universal law is a power-spectrum curve; use a frequency grid")
    omegas = build_grid(config.grid, config.universal.proxy_n)
    results = s_infinity_curve(omegas, config.universal, config.theory, workers)
    columns = {
        "omega": omegas,
        "s_inf": [r.value for r in results],
        "delta_s": [r.delta for r in results],
        "small_omega": s_small_omega(omegas),
        "singular": 1.0 / (_TWO_PI * omegas),
        "s_half_n": [r.half_value for r in results],
        "convergence": [r.convergence for r in results],
    }
    meta = {
        "proxy_n": config.universal.proxy_n,
        "unconverged": int(sum(not r.converged for r in results)),
    }
    stem = output_stem(config, f"universal-n{config.universal.proxy_n}")
    return _write_columns(config, stem, columns, "universal", meta)


# ---------------------------------------------------------------------------
# Compare and verify
# ---------------------------------------------------------------------------


@dataclass
class CompareReport:
    points: int
    x_range: tuple[float, float]
    max_rel: float
    rms_rel: float
    chi2_per_point: float | None
    within_3sigma: float | None
    metric: str
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(vars(self))


def compare_curves(
    a: SpectrumCurve,
    b: SpectrumCurve,
    tolerance: float = 0.01,
    metric: str = "rms",
    x_min: float | None = None,
    x_max: float | None = None,
) -> CompareReport:
    """Relative deviation of *a* from the reference *b* on the denser grid.

    Raises:
        DataError: If the curves are of different quantities.
        DomainError: If the grids do not overlap.
    """
    if a.quantity is not b.quantity:
        raise DataError(f"Cannot compare {a.quantity} with {b.quantity}")
    lo = max(a.x[0], b.x[0], -np.inf if x_min is None else x_min)
    hi = min(a.x[-1], b.x[-1], np.inf if x_max is None else x_max)
    dense = a if a.x.size >= b.x.size else b
    x = dense.x[(dense.x >= lo) & (dense.x <= hi)]
    if lo >= hi or x.size == 0:
        raise DomainError("Curves have no overlapping grid points")

    va = np.interp(x, a.x, a.values)
    vb = np.interp(x, b.x, b.values)
    rel = np.abs(va - vb) / np.maximum(np.abs(vb), 1e-300)
    max_rel = float(rel.max())
    rms_rel = float(np.sqrt(np.mean(rel**2)))

    chi2 = within = None
    variance = np.zeros_like(x)
    for curve in (a, b):
        if curve.stderr is not None:
            variance = variance + np.interp(x, curve.x, curve.stderr) ** 2
    if np.all(variance > 0):
        z = (va - vb) / np.sqrt(variance)
        chi2 = float(np.mean(z**2))
        within = float(np.mean(np.abs(z) <= 3.0))

    if metric not in ("rms", "max"):
        raise UsageError(f"Unknown comparison metric '{metric}'")
    score = rms_rel if metric == "rms" else max_rel
    return CompareReport(
        points=int(x.size),
        x_range=(float(x[0]), float(x[-1])),
        max_rel=max_rel,
        rms_rel=rms_rel,
        chi2_per_point=chi2,
        within_3sigma=within,
        metric=metric,
        tolerance=tolerance,
        passed=score <= tolerance,
    )


def cmd_compare(
    path_a: str | Path,
    path_b: str | Path,
    tolerance: float = 0.01,
    metric: str = "rms",
    x_min: float | None = None,
    x_max: float | None = None,
    report_path: str | Path | None = None,
) -> CompareReport:
    """Compare two curve files; *path_b* is the reference.

    Raises:
        ComparisonFailed: If the deviation exceeds *tolerance* (after writing the report).
    """
    a, _ = read_curve(path_a)
    b, _ = read_curve(path_b)
    report = compare_curves(a, b, tolerance, metric, x_min, x_max)
    logger.info(
        "Compare %s vs %s: max rel %.3e, rms rel %.3e over %d points",
        path_a, path_b, report.max_rel, report.rms_rel, report.points,
    )
    if report_path is not None:
        write_report(report_path, {"a": str(path_a), "b": str(path_b), **report.to_dict()})
    if not report.passed:
        score = report.rms_rel if metric == "rms" else report.max_rel
        raise ComparisonFailed(
            f"{metric} relative deviation {score:.3e} exceeds tolerance {tolerance:.3e}"
        )
    return report


def cmd_verify(
    suite: str, quick: bool = False, report_path: str | Path | None = None
) -> list[SuiteReport]:
    """Run cross-oracle suites.

    Raises:
        ComparisonFailed: If any check fails (after writing the report).
    """
    reports = run_suite(suite, quick)
    if report_path is not None:
        write_report(report_path, {"suites": [r.to_dict() for r in reports]})
    failed = [c.name for r in reports for c in r.checks if not c.passed]
    if failed:
        raise ComparisonFailed(f"Verification failed: {', '.join(failed)}")
    return reports


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FigureScale:
    n: int
    realizations: int
    grid_count: int


FIGURE_SCALES: dict[int, dict[str, FigureScale]] = {
    1: {"desk": FigureScale(2048, 100_000, 0), "full": FigureScale(2048, 10_000_000, 0)},
    2: {"desk": FigureScale(2048, 100_000, 128), "full": FigureScale(2048, 10_000_000, 256)},
    3: {"desk": FigureScale(0, 0, 200), "full": FigureScale(0, 0, 1000)},
    4: {"desk": FigureScale(256, 20_000, 48), "full": FigureScale(10_000, 10_000_000, 128)},
    5: {"desk": FigureScale(256, 0, 24), "full": FigureScale(10_000, 0, 64)},
}

# Single-worker costs in seconds, fitted to timed runs (one TCUE frequency: 57 s at N=500).
_COST_MC_UNCORRELATED = 5e-9  # per level per grid point
_COST_MC_CUE = 1e-9  # per N^3 per realization
_COST_TCUE = 2.4e-4  # per N^2 per frequency, dPV engine


def estimate_seconds(figure: int, scale: str) -> float:
    """Single-worker runtime estimate in seconds for a figure at a scale."""
    s = FIGURE_SCALES[figure][scale]
    if figure in (1, 2):
        points = s.n // 2 if figure == 1 else s.grid_count
        return _COST_MC_UNCORRELATED * s.realizations * s.n * points
    if figure == 4:
        theory = _COST_TCUE * s.n**2 * s.grid_count
        return theory + _COST_MC_CUE * s.realizations * s.n**3
    if figure == 5:
        # proxy N and N/2
        return 1.25 * _COST_TCUE * s.n**2 * s.grid_count
    return 1.0


def _figure_1(config, scale, workers):
    ens = replace(
        config.ensemble, generator="uncorrelated", distribution="exp",
        n=scale.n, realizations=scale.realizations,
    )
    omegas = discrete_frequencies(scale.n)
    mc = simulate_curve(ens, omegas, Quantity.POWER_SPECTRUM, workers)
    return {
        "omega": omegas,
        "s_mc": mc.values,
        "stderr": mc.stderr if mc.stderr is not None else [None] * omegas.size,
        "s_theory": s_uncorrelated_exact(scale.n, omegas, 1.0),
    }


def _figure_2(config, scale, workers):
    n = scale.n
    ens = replace(
        config.ensemble, generator="uncorrelated", distribution="exp",
        n=n, realizations=scale.realizations,
    )
    dist = get_distribution("exp")
    taus = np.geomspace(1.0 / n, 2.0, scale.grid_count)
    mc = simulate_curve(ens, taus, Quantity.FORM_FACTOR, workers)
    return {
        "tau": taus,
        "k_mc": mc.values,
        "stderr": mc.stderr if mc.stderr is not None else [None] * taus.size,
        "k_exact": form_factor_exact(n, taus, dist),
        "k_infrared": form_factor_scaling(Regime.INFRARED, n * taus, dist),
        "k_intermediate": form_factor_scaling(Regime.INTERMEDIATE, math.sqrt(n) * taus, dist),
        "k_fixed": form_factor_scaling(Regime.FIXED, taus, dist),
    }


def _figure_3(config, scale, workers):
    x = np.linspace(0.0, np.pi / 2.0, scale.grid_count + 2)[1:-1]
    argument = np.tan(x)
    columns = {"x": x, "argument": argument}
    for name in ("erlang", "inverse-gaussian", "uniform"):
        dist = get_distribution(name)
        for regime in Regime:
            columns[f"{name}_{regime}"] = form_factor_scaling(regime, argument, dist)
    return columns


def _figure_4(config, scale, workers):
    omegas = np.linspace(np.pi / scale.grid_count, np.pi, scale.grid_count)
    theory = s_tcue_curve(scale.n, omegas, replace(config.theory, engine="dpv"), workers)
    ens = replace(config.ensemble, generator="cue", n=scale.n, realizations=scale.realizations)
    mc = simulate_curve(ens, omegas, Quantity.POWER_SPECTRUM, workers)
    return {
        "omega": omegas,
        "s_theory": theory.values,
        "s_mc": mc.values,
        "stderr": mc.stderr if mc.stderr is not None else [None] * omegas.size,
    }


def _figure_5(config, scale, workers):
    omegas = np.linspace(np.pi / scale.grid_count, np.pi, scale.grid_count)
    universal = replace(config.universal, proxy_n=scale.n)
    results = s_infinity_curve(omegas, universal, config.theory, workers)
    return {
        "omega": omegas,
        "s_inf": [r.value for r in results],
        "delta_s": [r.delta for r in results],
        "singular": 1.0 / (_TWO_PI * omegas),
        "small_omega": s_small_omega(omegas),
        "convergence": [r.convergence for r in results],
    }


_FIGURES = {1: _figure_1, 2: _figure_2, 3: _figure_3, 4: _figure_4, 5: _figure_5}


def cmd_figures(figure: int, config: ExperimentConfig, workers: int = 1) -> list[Path]:
    """Data columns needed to replot one figure at desk or full scale.

    Raises:
        UsageError: For an unknown figure id, or full scale without opt-in.
    """
    if figure not in _FIGURES:
        raise UsageError(f"Unknown figure {figure}; valid ids are 1..5")
    if config.scale == "full" and not config.allow_long_run:
        hours = estimate_seconds(figure, "full") / 3600.0
        raise UsageError(
            f"Figure {figure} at full scale is estimated at ~{hours:.1f} h; "
            "pass --allow-long-run to proceed"
        )
    scale = FIGURE_SCALES[figure][config.scale]
    logger.info(
        "Figure %d at %s scale (~%.0f s estimated)",
        figure, config.scale, estimate_seconds(figure, config.scale),
    )
    columns = _FIGURES[figure](config, scale, workers)
    meta = {"figure": figure, "scale": config.scale, **vars(scale)}
    stem = output_stem(config, f"figure{figure}-{config.scale}")
    return _write_columns(config, stem, columns, f"figure-{figure}", meta)
