"""Eigenlevel sequences and ensemble estimators of the power spectrum and form factor."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Callable, Sequence

import numpy as np

from powerspec.errors import DomainError, InsufficientDataError

logger = logging.getLogger(__name__)

#: Number of batch-mean groups used for standard errors.
ERROR_GROUPS = 16

# Largest number of complex entries materialized at once by the form-factor features.
_FEATURE_BLOCK = 1 << 22

_OMEGA_MAX = np.pi * (1.0 + 4.0 * np.finfo(float).eps)


class Provenance(StrEnum):
    MONTE_CARLO = "monte-carlo"
    EXACT_BASELINE = "exact-baseline"
    TCUE_THEORY = "tcue-theory"
    UNIVERSAL_LAW = "universal-law"


class Quantity(StrEnum):
    POWER_SPECTRUM = "power-spectrum"
    FORM_FACTOR = "form-factor"


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelSequence:
    """Ordered unfolded eigenlevels with their mean spacing."""

    levels: np.ndarray
    mean_spacing: float = 1.0

    def __post_init__(self) -> None:
        levels = np.asarray(self.levels, dtype=float)
        if levels.ndim != 1 or levels.size < 1:
            raise DomainError("A level sequence needs at least one level")
        if np.any(np.diff(levels) < 0):
            raise DomainError("Levels must be non-decreasing")
        if not self.mean_spacing > 0:
            raise DomainError(f"Mean spacing must be positive, got {self.mean_spacing}")
        object.__setattr__(self, "levels", levels)

    @property
    def n(self) -> int:
        return self.levels.size


@dataclass(frozen=True)
class DisplacementEnsemble:
    """Level displacements from their ensemble means, one realization per row."""

    realizations: np.ndarray
    mean_levels: np.ndarray | None = None
    mean_spacing: float = 1.0

    def __post_init__(self) -> None:
        data = np.asarray(self.realizations, dtype=float)
        if data.ndim != 2 or data.shape[1] < 1:
            raise DomainError("Realizations must form an R x N array with N >= 1")
        object.__setattr__(self, "realizations", data)

    @property
    def n(self) -> int:
        return self.realizations.shape[1]

    @property
    def r(self) -> int:
        return self.realizations.shape[0]


@dataclass
class SpectrumCurve:
    """Samples of a spectral quantity on a grid, with provenance metadata.

    ``x`` holds frequencies ω for power spectra and times τ for form factors.
    """

    x: np.ndarray
    values: np.ndarray
    provenance: Provenance
    quantity: Quantity = Quantity.POWER_SPECTRUM
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.provenance = Provenance(self.provenance)
        self.quantity = Quantity(self.quantity)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.x.shape:
                raise DomainError("stderr must match the grid shape")
        if self.x.ndim != 1 or self.x.shape != self.values.shape:
            raise DomainError("Grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise DomainError("Grid values must be strictly increasing")
        if self.quantity is Quantity.POWER_SPECTRUM and self.x.size:
            if self.x[0] <= 0 or self.x[-1] > _OMEGA_MAX:
                raise DomainError("Frequencies must lie in (0, pi]")
        if self.quantity is Quantity.FORM_FACTOR and self.x.size and self.x[0] < 0:
            raise DomainError("Form-factor times must be non-negative")
        if self.provenance is Provenance.MONTE_CARLO and np.any(self.values < 0):
            raise DomainError("Monte Carlo variance estimates cannot be negative")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.values.tolist()))


# ---------------------------------------------------------------------------
# Grids and Fourier coefficients
# ---------------------------------------------------------------------------


def discrete_frequencies(n: int) -> np.ndarray:
    """Return ω_k = 2πk/N for k = 1..N/2."""
    k = np.arange(1, n // 2 + 1)
    return np.pi * (2.0 * k / n)


def fourier_coefficient(realization: Sequence[float] | np.ndarray, k: int) -> complex:
    """Discrete Fourier coefficient a_k = N^{-1/2} Σ_ℓ δε_ℓ e^{iω_k ℓ}, ω_k = 2πk/N.

    Raises:
        DomainError: If k is outside 1..N/2.
    """
    data = np.asarray(realization, dtype=float)
    n = data.size
    if not 1 <= k <= n // 2:
        raise DomainError(f"k must lie in 1..{n // 2}, got {k}")
    omega = np.pi * (2.0 * k / n)
    ell = np.arange(1, n + 1)
    return complex(np.sum(data * np.exp(1j * omega * ell)) / np.sqrt(n))


# ---------------------------------------------------------------------------
# Streaming variance accumulator
# ---------------------------------------------------------------------------


class SpectrumAccumulator:
    """Mergeable accumulator for the variance of complex features.

    Realizations are spread over :data:`ERROR_GROUPS` contiguous groups; the
    pooled variance uses every realization (1/R normalization) and the spread
    of the per-group variances gives a batch-means standard error.

    Args:
        size: Number of features per realization (grid points).
        groups: Number of batch-mean groups.
    """

    def __init__(self, size: int, groups: int = ERROR_GROUPS):
        self.count = np.zeros(groups, dtype=np.int64)
        self.mean = np.zeros((groups, size), dtype=complex)
        self.m2 = np.zeros((groups, size), dtype=float)

    @property
    def total(self) -> int:
        return int(self.count.sum())

    @staticmethod
    def _combine(n_a, mean_a, m2_a, n_b, mean_b, m2_b):
        n = n_a + n_b
        if n_a == 0:
            return n_b, mean_b.copy(), m2_b.copy()
        if n_b == 0:
            return n_a, mean_a, m2_a
        delta = mean_b - mean_a
        mean = mean_a + delta * (n_b / n)
        m2 = m2_a + m2_b + np.abs(delta) ** 2 * (n_a * n_b / n)
        return n, mean, m2

    def add(self, features: np.ndarray, group: int) -> None:
        """Fold a (B, size) block of realizations into *group*."""
        if features.shape[0] == 0:
            return
        batch_mean = features.mean(axis=0)
        batch_m2 = np.sum(np.abs(features - batch_mean) ** 2, axis=0)
        n, mean, m2 = self._combine(
            int(self.count[group]), self.mean[group], self.m2[group],
            features.shape[0], batch_mean, batch_m2,
        )
        self.count[group], self.mean[group], self.m2[group] = n, mean, m2

    def merge(self, other: SpectrumAccumulator) -> None:
        """Merge *other* into this accumulator group by group."""
        for g in range(self.count.size):
            n, mean, m2 = self._combine(
                int(self.count[g]), self.mean[g], self.m2[g],
                int(other.count[g]), other.mean[g], other.m2[g],
            )
            self.count[g], self.mean[g], self.m2[g] = n, mean, m2

    def variance(self) -> np.ndarray:
        """Pooled plug-in variance over all realizations."""
        n, mean, m2 = 0, self.mean[0] * 0, self.m2[0] * 0
        for g in range(self.count.size):
            n, mean, m2 = self._combine(n, mean, m2, int(self.count[g]), self.mean[g], self.m2[g])
        if n < 2:
            raise InsufficientDataError(f"At least 2 realizations are required, got {n}")
        return m2 / n

    def stderr(self) -> np.ndarray | None:
        """Batch-means standard error of :meth:`variance`, or None with < 2 usable groups."""
        usable = self.count >= 2
        if usable.sum() < 2:
            return None
        per_group = self.m2[usable] / self.count[usable, None]
        return per_group.std(axis=0, ddof=1) / np.sqrt(usable.sum())


def group_of(index: np.ndarray, total: int, groups: int = ERROR_GROUPS) -> np.ndarray:
    """Batch-mean group of each realization index (contiguous blocks)."""
    return (np.asarray(index, dtype=np.int64) * groups) // max(total, 1)


def accumulate(
    batch: np.ndarray,
    features: Callable[[np.ndarray], np.ndarray],
    first_index: int,
    total: int,
    size: int,
) -> SpectrumAccumulator:
    """Reduce a block of realizations starting at *first_index* to an accumulator."""
    acc = SpectrumAccumulator(size)
    values = features(batch)
    groups = group_of(np.arange(first_index, first_index + batch.shape[0]), total)
    for g in np.unique(groups):
        acc.add(values[groups == g], int(g))
    return acc


# ---------------------------------------------------------------------------
# Feature maps
# ---------------------------------------------------------------------------


class FourierFeatures:
    """Map (B, N) levels to (B, M) Fourier sums N^{-1/2} Σ_ℓ ε_ℓ e^{iωℓ} / Δ."""

    def __init__(self, n: int, omegas: np.ndarray, mean_spacing: float = 1.0):
        ell = np.arange(1, n + 1)
        self._basis = np.exp(1j * np.outer(ell, np.asarray(omegas, dtype=float)))
        self._scale = 1.0 / (np.sqrt(n) * mean_spacing)

    def __call__(self, levels: np.ndarray) -> np.ndarray:
        return (np.asarray(levels, dtype=float) @ self._basis) * self._scale


class FormFactorFeatures:
    """Map (B, N) levels to (B, M) sums Σ_ℓ e^{2πiτε_ℓ}."""

    def __init__(self, taus: np.ndarray):
        self._taus = np.asarray(taus, dtype=float)

    def __call__(self, levels: np.ndarray) -> np.ndarray:
        levels = np.asarray(levels, dtype=float)
        out = np.empty((levels.shape[0], self._taus.size), dtype=complex)
        step = max(1, _FEATURE_BLOCK // max(levels.size, 1))
        for start in range(0, self._taus.size, step):
            taus = self._taus[start : start + step]
            phases = np.exp(2j * np.pi * levels[:, :, None] * taus[None, None, :])
            out[:, start : start + step] = phases.sum(axis=1)
        return out


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def center_ensemble(sequences: Sequence[LevelSequence]) -> DisplacementEnsemble:
    """Subtract the per-index ensemble mean ⟨ε_ℓ⟩ from every sequence.

    Raises:
        InsufficientDataError: With fewer than 2 sequences.
        DomainError: If sequences have different lengths.
    """
    if len(sequences) < 2:
        raise InsufficientDataError(f"At least 2 sequences are required, got {len(sequences)}")
    n = sequences[0].n
    if any(seq.n != n for seq in sequences):
        raise DomainError("All sequences must have the same number of levels")
    stacked = np.vstack([seq.levels for seq in sequences])
    means = stacked.mean(axis=0)
    return DisplacementEnsemble(
        realizations=stacked - means,
        mean_levels=means,
        mean_spacing=sequences[0].mean_spacing,
    )


def ensemble_spectrum_values(
    ensemble: DisplacementEnsemble, mean_spacing: float, omegas: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    """Plug-in estimate of S_N at arbitrary frequencies, with batch-means errors."""
    omegas = np.asarray(omegas, dtype=float)
    features = FourierFeatures(ensemble.n, omegas, mean_spacing)
    acc = accumulate(ensemble.realizations, features, 0, ensemble.r, omegas.size)
    return acc.variance(), acc.stderr()


def power_spectrum_mc(
    ensemble: DisplacementEnsemble,
    mean_spacing: float | None = None,
    grid: Sequence[float] | np.ndarray | None = None,
) -> SpectrumCurve:
    """Monte Carlo power spectrum as the ensemble variance of Fourier sums.

    Args:
        ensemble: Centered displacements, R >= 2 realizations.
        mean_spacing: Δ; defaults to the ensemble's mean spacing.
        grid: Frequencies in (0, π]; defaults to the discrete grid ω_k.

    Raises:
        InsufficientDataError: If R < 2.
        DomainError: If the grid is empty or leaves (0, π].
    """
    if ensemble.r < 2:
        raise InsufficientDataError(f"At least 2 realizations are required, got {ensemble.r}")
    delta = ensemble.mean_spacing if mean_spacing is None else mean_spacing
    omegas = discrete_frequencies(ensemble.n) if grid is None else np.asarray(grid, dtype=float)
    if omegas.size == 0:
        raise DomainError("Frequency grid is empty")
    if np.any(omegas <= 0) or np.any(omegas > _OMEGA_MAX):
        raise DomainError("Frequencies must lie in (0, pi]")
    values, stderr = ensemble_spectrum_values(ensemble, delta, omegas)
    return SpectrumCurve(
        x=omegas,
        values=values,
        stderr=stderr,
        provenance=Provenance.MONTE_CARLO,
        meta={"n": ensemble.n, "r": ensemble.r, "mean_spacing": delta},
    )


def form_factor_mc(sequences: Sequence[LevelSequence], taus: Sequence[float]) -> SpectrumCurve:
    """Monte Carlo spectral form factor K_N(τ) = var[Σ_ℓ e^{2πiτε_ℓ}] / N.

    Raises:
        InsufficientDataError: With fewer than 2 sequences.
        DomainError: For ragged sequences or negative τ.
    """
    if len(sequences) < 2:
        raise InsufficientDataError(f"At least 2 sequences are required, got {len(sequences)}")
    n = sequences[0].n
    if any(seq.n != n for seq in sequences):
        raise DomainError("All sequences must have the same number of levels")
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < 0):
        raise DomainError("Form-factor times must be non-negative")
    levels = np.vstack([seq.levels for seq in sequences])
    acc = accumulate(levels, FormFactorFeatures(taus), 0, len(sequences), taus.size)
    stderr = acc.stderr()
    return SpectrumCurve(
        x=taus,
        values=acc.variance() / n,
        stderr=None if stderr is None else stderr / n,
        provenance=Provenance.MONTE_CARLO,
        quantity=Quantity.FORM_FACTOR,
        meta={"n": n, "r": len(sequences)},
    )
