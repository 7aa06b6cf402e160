"""The N → ∞ TCUE power spectrum and its small-frequency law.

S_∞(ω) is approximated by a large-N proxy evaluated through the dPV engine,
with a convergence estimate from the proxy at N/2. The small-ω expansion and
the Barnes-G prefactors A(ω̃), B(ω̃) are closed forms (ω̃ = ω/2π).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from powerspec.config import TheoryConfig, UniversalConfig
from powerspec.errors import DomainError
from powerspec.theory import s_tcue
from powerspec.workers import map_ordered

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi
_SERIES_TERMS = 80


# ---------------------------------------------------------------------------
# Barnes G
# ---------------------------------------------------------------------------


def _log_barnes_g_strip(z: float) -> float:
    """ln G(1+z) for |z| ≤ 1/2 from its Taylor series."""
    k = np.arange(2, _SERIES_TERMS)
    series = np.sum((-1.0) ** k * special.zeta(k) * z ** (k + 1) / (k + 1))
    return 0.5 * z * math.log(_TWO_PI) - 0.5 * (z + (1.0 + np.euler_gamma) * z * z) + series


def log_barnes_g(x: float) -> float:
    """ln G(x) for real x > 0.

    Shifts x into [1/2, 3/2] with G(x+1) = Γ(x)G(x) and sums the Taylor
    series of ln G(1+z) there.

    Raises:
        DomainError: For x <= 0.
    """
    if x <= 0:
        raise DomainError(f"log_barnes_g needs x > 0, got {x}")
    shift = 0.0
    while x > 1.5:
        x -= 1.0
        shift += special.gammaln(x)
    while x < 0.5:
        shift -= special.gammaln(x)
        x += 1.0
    return float(shift + _log_barnes_g_strip(x - 1.0))


def _check_scaled(omega_tilde: float) -> None:
    if not 0.0 < omega_tilde < 0.5:
        raise DomainError(f"omega_tilde must lie in (0, 1/2), got {omega_tilde}")


def prefactor_A(omega_tilde: float) -> float:
    """A(ω̃) = (1/2π) G(1+ω̃)G(1−ω̃)G(2+ω̃)G(2−ω̃) / sin(πω̃)."""
    _check_scaled(omega_tilde)
    w = omega_tilde
    log_g = (
        log_barnes_g(1.0 + w) + log_barnes_g(1.0 - w)
        + log_barnes_g(2.0 + w) + log_barnes_g(2.0 - w)
    )
    return float(math.exp(log_g) / (_TWO_PI * math.sin(math.pi * w)))


def prefactor_B(omega_tilde: float) -> float:
    """B(ω̃) = (1/2π) sin(πω̃²) ω̃^{2ω̃²−2} Γ(2−2ω̃²)."""
    _check_scaled(omega_tilde)
    w2 = omega_tilde**2
    return float(
        math.sin(math.pi * w2) * omega_tilde ** (2.0 * w2 - 2.0) * special.gamma(2.0 - 2.0 * w2)
        / _TWO_PI
    )


def assembled_small_omega(omega_tilde: float) -> float:
    """A(ω̃)(B(ω̃) + 2ω̃²); agrees with :func:`s_small_omega` up to O(ω̃³ ln² ω̃)."""
    return prefactor_A(omega_tilde) * (prefactor_B(omega_tilde) + 2.0 * omega_tilde**2)


# ---------------------------------------------------------------------------
# Closed-form laws
# ---------------------------------------------------------------------------


def s_small_omega(omega):
    """Small-frequency expansion 1/(4π²ω̃) + ω̃ ln ω̃/(2π²) + ω̃/12 of S_∞."""
    w = np.asarray(omega, dtype=float) / _TWO_PI
    if np.any(w <= 0):
        raise DomainError("omega must be positive")
    value = 1.0 / (4.0 * np.pi**2 * w) + w * np.log(w) / (2.0 * np.pi**2) + w / 12.0
    return float(value) if np.ndim(value) == 0 else value


def s_brownian(omega, beta: float = 2.0):
    """Leading small-ω behavior 1/(πβω) shared by the circular ensembles."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("omega must be positive")
    value = 1.0 / (np.pi * beta * omega)
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# Large-N proxy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniversalValue:
    """Proxy value of S_∞(ω) with its two-N convergence estimate.

    Attributes:
        value: S_N(ω) at the proxy N.
        half_value: S_{N/2}(ω).
        convergence: |value − half_value| / |value|.
        converged: Whether ``convergence`` is within the configured tolerance.
    """

    omega: float
    proxy_n: int
    value: float
    half_value: float
    convergence: float
    converged: bool

    @property
    def singular_part(self) -> float:
        return 1.0 / (_TWO_PI * self.omega)

    @property
    def delta(self) -> float:
        """δS_∞ = S_∞ − 1/(2πω)."""
        return self.value - self.singular_part


def s_infinity(
    omega: float,
    config: UniversalConfig | None = None,
    settings: TheoryConfig | None = None,
    workers: int = 1,
) -> UniversalValue:
    """S_∞(ω) approximated by S_N(ω) at the proxy N (dPV engine).

    A convergence estimate above ``config.tolerance`` is logged as a warning
    and recorded on the result.
    """
    config = config or UniversalConfig()
    if not 0.0 < omega <= np.pi:
        raise DomainError(f"omega must lie in (0, pi], got {omega}")
    n = config.proxy_n
    value = s_tcue(n, omega, "dpv", settings, workers)
    half_value = s_tcue(max(1, n // 2), omega, "dpv", settings, workers)
    convergence = abs(value - half_value) / max(abs(value), 1e-300)
    converged = convergence <= config.tolerance
    if not converged:
        logger.warning(
            "S_inf proxy at omega=%.4g not converged: |S_N - S_N/2|/|S_N| = %.2e (N=%d)",
            omega, convergence, n,
        )
    return UniversalValue(
        omega=float(omega),
        proxy_n=n,
        value=value,
        half_value=half_value,
        convergence=convergence,
        converged=converged,
    )


def s_infinity_curve(
    omegas,
    config: UniversalConfig | None = None,
    settings: TheoryConfig | None = None,
    workers: int = 1,
) -> list[UniversalValue]:
    """Proxy S_∞ over a frequency grid, one work item per frequency."""
    omegas = np.asarray(omegas, dtype=float)
    logger.info(
        "S_inf proxy on %d frequencies (N=%d)",
        omegas.size, (config or UniversalConfig()).proxy_n,
    )
    return map_ordered(lambda w: s_infinity(float(w), config, settings), omegas, workers)
