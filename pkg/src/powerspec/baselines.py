"""Closed-form analytics for sequences with uncorrelated spacings.

Levels are running sums ε_ℓ = s_1 + ... + s_ℓ of i.i.d. spacings with unit
mean and variance σ². Everything here is exact and vectorized over the
frequency (or time) argument.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum
from typing import Callable

import numpy as np
from scipy import stats

from powerspec.errors import DomainError

logger = logging.getLogger(__name__)

CharFn = Callable[[np.ndarray], np.ndarray]
Sampler = Callable[[np.random.Generator, int], np.ndarray]


class Regime(StrEnum):
    INFRARED = "infrared"
    INTERMEDIATE = "intermediate"
    FIXED = "fixed"


# ---------------------------------------------------------------------------
# Spacing distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpacingDistribution:
    """Mean, variance and characteristic function of a level-spacing law.

    Attributes:
        name: Identifier used by the CLI and config.
        mean: Mean spacing (1 for every built-in).
        variance: σ².
        char_fn: Vectorized τ → Ψ_s(τ) = ⟨e^{2πiτs}⟩.
        sampler: ``(rng, size) -> spacings``, or None for analytic-only laws.
        density: Spacing density, when known (used by quadrature checks).
    """

    name: str
    mean: float
    variance: float
    char_fn: CharFn
    sampler: Sampler | None = None
    density: Callable[[np.ndarray], np.ndarray] | None = None


def _exp_char(tau):
    return 1.0 / (1.0 - 2j * np.pi * tau)


def _erlang_char(tau):
    return (1.0 - 2j * np.pi * tau / 3.0) ** -3


def _inverse_gaussian_char(tau, mu: float = 1.0, lam: float = 3.0):
    # principal square-root branch
    return np.exp(lam / mu * (1.0 - np.sqrt(1.0 - 2j * mu**2 * (2.0 * np.pi * tau) / lam)))


def _uniform_char(tau):
    return np.exp(2j * np.pi * tau) * np.sinc(2.0 * tau)


def _deterministic_char(tau):
    return np.exp(2j * np.pi * tau)


def _inverse_gaussian_density(s):
    s = np.asarray(s, dtype=float)
    return np.sqrt(3.0 / (2.0 * np.pi * s**3)) * np.exp(-3.0 * (s - 1.0) ** 2 / (2.0 * s))


BUILTINS: dict[str, SpacingDistribution] = {
    "exp": SpacingDistribution(
        name="exp",
        mean=1.0,
        variance=1.0,
        char_fn=_exp_char,
        sampler=lambda rng, size: rng.exponential(1.0, size),
        density=lambda s: np.exp(-np.asarray(s, dtype=float)),
    ),
    "erlang": SpacingDistribution(
        name="erlang",
        mean=1.0,
        variance=1.0 / 3.0,
        char_fn=_erlang_char,
        sampler=lambda rng, size: rng.gamma(3.0, 1.0 / 3.0, size),
        density=lambda s: 13.5 * np.asarray(s, dtype=float) ** 2 * np.exp(-3.0 * np.asarray(s)),
    ),
    "inverse-gaussian": SpacingDistribution(
        name="inverse-gaussian",
        mean=1.0,
        variance=1.0 / 3.0,
        char_fn=_inverse_gaussian_char,
        # numpy's Wald sampler is the normal-variate transform method
        sampler=lambda rng, size: rng.wald(1.0, 3.0, size),
        density=_inverse_gaussian_density,
    ),
    "uniform": SpacingDistribution(
        name="uniform",
        mean=1.0,
        variance=1.0 / 3.0,
        char_fn=_uniform_char,
        sampler=lambda rng, size: rng.uniform(0.0, 2.0, size),
        density=lambda s: np.where((np.asarray(s) > 0) & (np.asarray(s) < 2), 0.5, 0.0),
    ),
    "deterministic": SpacingDistribution(
        name="deterministic",
        mean=1.0,
        variance=0.0,
        char_fn=_deterministic_char,
        sampler=lambda rng, size: np.ones(size),
    ),
}


def get_distribution(name: str) -> SpacingDistribution:
    """Look up a built-in spacing law by name.

    Raises:
        DomainError: If *name* is unknown.
    """
    try:
        return BUILTINS[name]
    except KeyError:
        raise DomainError(
            f"Unknown spacing distribution '{name}'. Known: {', '.join(BUILTINS)}"
        ) from None


def custom_distribution(
    mean: float, variance: float, char_fn: CharFn, name: str = "custom"
) -> SpacingDistribution:
    """Build an analytic-only spacing law from a (mean, σ², Ψ) triple."""
    if variance < 0:
        raise DomainError(f"Variance must be non-negative, got {variance}")
    return SpacingDistribution(name=name, mean=mean, variance=variance, char_fn=char_fn)


def char_fn(dist: SpacingDistribution, tau):
    """Characteristic function Ψ_s(τ) of *dist*; scalar in, scalar out."""
    value = dist.char_fn(np.asarray(tau, dtype=float))
    return complex(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# Power spectrum
# ---------------------------------------------------------------------------


def _check_omega(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(omega > np.pi * (1 + 1e-15)):
        raise DomainError("Frequency must lie in (0, pi]")
    return omega


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def s_uncorrelated_exact(n: int, omega, variance: float):
    """Exact power spectrum of N levels with uncorrelated unit-mean spacings.

    At ω_k = 2πk/N this reduces to σ²/(2 sin²(ω_k/2)).

    Raises:
        DomainError: For N < 1 or ω outside (0, π].
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    omega = _check_omega(omega)
    half = np.sin(omega / 2.0)
    ratio = np.sin((n + 0.5) * omega) / ((2 * n + 1) * half)
    value = (2 * n + 1) / (4.0 * n) * variance / half**2 * (1.0 - ratio)
    return _scalar_or_array(value)


def s_discrete_uncorrelated(omega, variance: float):
    """σ²/(2 sin²(ω/2)): the exact spectrum on the discrete grid ω_k."""
    omega = _check_omega(omega)
    return _scalar_or_array(variance / (2.0 * np.sin(omega / 2.0) ** 2))


def ordered_level_covariance(ell: int, m: int, variance: float) -> float:
    """cov(ε_ℓ, ε_m) = σ² min(ℓ, m) for ordered levels with uncorrelated spacings."""
    if ell < 1 or m < 1:
        raise DomainError("Level indices start at 1")
    return variance * min(ell, m)


def s_uncorrelated_double_sum(n: int, omega: float, variance: float) -> float:
    """Direct covariance double sum (NΔ²)^{-1} Σ_{ℓ,m} cov e^{iω(ℓ−m)} with Δ = 1."""
    idx = np.arange(1, n + 1)
    cov = variance * np.minimum.outer(idx, idx)
    phase = np.exp(1j * omega * idx)
    return float(np.real(phase @ cov @ phase.conj()) / n)


def s_scaling(regime: Regime | str, argument, variance: float):
    """Limits of ω²S_N(ω) in the three scaling regimes.

    ``infrared`` takes Ω = Nω, ``intermediate`` is constant, ``fixed`` takes ω.
    """
    regime = Regime(regime)
    argument = np.asarray(argument, dtype=float)
    if np.any(argument <= 0):
        raise DomainError("Scaling argument must be positive")
    if regime is Regime.INFRARED:
        value = 2.0 * variance * (1.0 - np.sinc(argument / np.pi))
    elif regime is Regime.INTERMEDIATE:
        value = np.full(argument.shape, 2.0 * variance)
    else:
        value = variance * argument**2 / (2.0 * np.sin(argument / 2.0) ** 2)
    return _scalar_or_array(value)


# ---------------------------------------------------------------------------
# Form factor
# ---------------------------------------------------------------------------


def form_factor_exact(n: int, tau, dist: SpacingDistribution):
    """Exact K_N(τ) for uncorrelated spacings.

    Raises:
        DomainError: At τ = 0 (or wherever Ψ_s(τ) = 1), where the closed form
            has a removable singularity.
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    tau = np.asarray(tau, dtype=float)
    psi = np.asarray(dist.char_fn(tau), dtype=complex)
    one_minus = 1.0 - psi
    if np.any(tau == 0) or np.any(one_minus == 0):
        raise DomainError("K_N(tau) closed form is singular where Psi(tau) = 1 (e.g. tau = 0)")
    geometric = (1.0 - psi**n) / one_minus
    value = (
        1.0
        + (2.0 / n) * np.real(psi / one_minus * (n - geometric))
        - (1.0 / n) * np.abs(psi * geometric) ** 2
    )
    return _scalar_or_array(value)


def form_factor_scaling(regime: Regime | str, argument, dist: SpacingDistribution):
    """Limiting form factor in the three scaling regimes.

    ``infrared`` takes T = Nτ, ``intermediate`` takes 𝒯 = √N τ, ``fixed`` takes τ.
    """
    regime = Regime(regime)
    argument = np.asarray(argument, dtype=float)
    if np.any(argument <= 0):
        raise DomainError("Scaling argument must be positive")
    var = dist.variance
    if regime is Regime.INFRARED:
        value = 2.0 * var * (1.0 - np.sinc(2.0 * argument))
    elif regime is Regime.INTERMEDIATE:
        x = 4.0 * np.pi**2 * var * argument**2
        safe = np.where(x > 0, x, 1.0)
        decay = np.where(x > 0, -np.expm1(-safe) / safe, 1.0)
        value = var * (1.0 + decay)
    else:
        psi = np.asarray(dist.char_fn(argument), dtype=complex)
        value = 1.0 + 2.0 * np.real(psi / (1.0 - psi))
    return _scalar_or_array(value)


# ---------------------------------------------------------------------------
# Generating function of the Poisson (Exp(1)) model
# ---------------------------------------------------------------------------


def poisson_generating_function(n: int):
    """Exact Φ_N(ε;ζ) = Σ_ℓ (1−ζ)^ℓ E_N(ℓ;ε) for Exp(1) spacings.

    E_N(ℓ;ε) is Poisson(ε) for ℓ < N and the tail mass for ℓ = N.

    Returns:
        A provider ``(eps, zeta) -> (phi, dphi_dzeta)`` for
        :func:`powerspec.theory.s_from_generating_fn`.
    """

    def provider(eps: np.ndarray, zeta: complex) -> tuple[np.ndarray, np.ndarray]:
        eps = np.asarray(eps, dtype=float)
        ell = np.arange(n)[:, None]
        probs = stats.poisson.pmf(ell, eps[None, :])
        tail = stats.poisson.sf(n - 1, eps)
        x = 1.0 - zeta
        phi = (x ** ell[:, 0]) @ probs + x**n * tail
        dx = np.where(ell[:, 0] > 0, ell[:, 0] * x ** np.maximum(ell[:, 0] - 1, 0), 0.0)
        dphi = -(dx @ probs) - n * x ** (n - 1) * tail
        return phi, dphi

    return provider
