"""Seeded generators for eigenlevel ensembles.

Every realization draws from its own counter-derived stream, so a run is a
pure function of (parameters, seed) no matter how realizations are split
across workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from powerspec.baselines import SpacingDistribution, get_distribution
from powerspec.config import EnsembleConfig
from powerspec.errors import DomainError
from powerspec.spectra import LevelSequence

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SeededStream:
    """Random stream for one realization of a seeded run."""

    seed: int
    index: int

    @property
    def stream_id(self) -> tuple[int, int]:
        return (self.seed, self.index)

    def rng(self) -> np.random.Generator:
        """Fresh Philox generator keyed by (seed, index)."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(seq))


# ---------------------------------------------------------------------------
# Uncorrelated spacings
# ---------------------------------------------------------------------------


def gen_uncorrelated(
    n: int, dist: SpacingDistribution | str, stream: SeededStream
) -> LevelSequence:
    """Levels as running sums of N i.i.d. spacings drawn from *dist*.

    Raises:
        DomainError: For N < 1 or a distribution without a sampler.
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    if isinstance(dist, str):
        dist = get_distribution(dist)
    if dist.sampler is None:
        raise DomainError(f"Distribution '{dist.name}' has no sampler")
    spacings = dist.sampler(stream.rng(), n)
    return LevelSequence(levels=np.cumsum(spacings), mean_spacing=dist.mean)


# ---------------------------------------------------------------------------
# Circular ensembles
# ---------------------------------------------------------------------------


def _haar_angles(n: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted eigenangles in [0, 2π) of a Haar-random n x n unitary."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    angles = np.mod(np.angle(np.linalg.eigvals(q)), _TWO_PI)
    angles[angles >= _TWO_PI] = 0.0
    return np.sort(angles)


def gen_cue(n: int, stream: SeededStream) -> np.ndarray:
    """Sorted eigenangles of an N x N CUE matrix."""
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    return _haar_angles(n, stream.rng())


def gen_tcue(n: int, stream: SeededStream) -> np.ndarray:
    """Sorted angles of TCUE_N: CUE_{N+1} rotated so a uniformly chosen angle sits at 0.

    The conditional law of the remaining N angles is the tuned ensemble's
    density by rotation invariance.
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    rng = stream.rng()
    angles = _haar_angles(n + 1, rng)
    pick = int(rng.integers(n + 1))
    rotated = np.mod(np.delete(angles, pick) - angles[pick], _TWO_PI)
    return np.sort(rotated)


def _check_sorted(angles: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 1 or angles.size < 1:
        raise DomainError("Expected a non-empty 1-D array of angles")
    if np.any(np.diff(angles) < 0):
        raise DomainError("Angles must be sorted")
    return angles


def unfold_cue(angles: np.ndarray) -> LevelSequence:
    """Unfold CUE_N angles to unit mean density: ε = θN/2π, Δ = 1."""
    angles = _check_sorted(angles)
    return LevelSequence(levels=angles * angles.size / _TWO_PI, mean_spacing=1.0)


def unfold_tcue(angles: np.ndarray) -> LevelSequence:
    """Unfold TCUE_N angles to unit mean spacing: ε = θ(N+1)/2π, Δ = 1."""
    angles = _check_sorted(angles)
    return LevelSequence(levels=angles * (angles.size + 1) / _TWO_PI, mean_spacing=1.0)


# ---------------------------------------------------------------------------
# Blocks of realizations
# ---------------------------------------------------------------------------


def sample_block(
    generator: str, n: int, distribution: str, seed: int, first: int, count: int
) -> np.ndarray:
    """Unfolded levels (Δ = 1) of realizations ``first .. first+count-1`` as a (count, N) array.

    Raises:
        DomainError: For an unknown generator name.
    """
    out = np.empty((count, n))
    if generator == "uncorrelated":
        dist = get_distribution(distribution)
        for row in range(count):
            out[row] = gen_uncorrelated(n, dist, SeededStream(seed, first + row)).levels
    elif generator == "cue":
        for row in range(count):
            out[row] = unfold_cue(gen_cue(n, SeededStream(seed, first + row))).levels
    elif generator == "tcue":
        for row in range(count):
            out[row] = unfold_tcue(gen_tcue(n, SeededStream(seed, first + row))).levels
    else:
        raise DomainError(f"Unknown generator '{generator}'")
    return out


def sample_ensemble(config: EnsembleConfig, chunk: tuple[int, int]) -> np.ndarray:
    """Levels of the realizations in *chunk* = (first, count) for an ensemble config."""
    first, count = chunk
    return sample_block(
        config.generator, config.n, config.distribution, config.seed, first, count
    )
