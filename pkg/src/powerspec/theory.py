"""Finite-N power spectrum from the master formulas and the TCUE generating function.

Everything funnels through one operator,

    L[G] = z G'(z) − N G(z) − (1 − z^{−N})/(1 − z) · G(z),    z = e^{iω},

applied to a polynomial of level variances (first master formula), to a
half-line integral of a generic generating function (second master formula),
or to G = z/(1−z) ∫ φ Φ_N(φ;1−z) dφ/2π for TCUE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from powerspec.config import TheoryConfig
from powerspec.dpv import endpoint_window, phi_auto
from powerspec.errors import AccuracyError, DomainError
from powerspec.oracles import TOEPLITZ_MAX_N, composite_gauss_legendre, toeplitz_values
from powerspec.spectra import Provenance, SpectrumCurve
from powerspec.workers import map_ordered

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi
_OMEGA_MAX = np.pi * (1.0 + 4.0 * np.finfo(float).eps)
_SYMMETRY_TOLERANCE = 1e-9

GfProvider = Callable[[np.ndarray, complex], tuple[np.ndarray, np.ndarray]]


# ---------------------------------------------------------------------------
# Operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorContext:
    """z = e^{iω} and the operator factors for a given N."""

    n: int
    omega: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"N must be >= 1, got {self.n}")
        if not 0.0 < self.omega <= _OMEGA_MAX:
            raise DomainError(f"omega must lie in (0, pi], got {self.omega}")

    @property
    def z(self) -> complex:
        return complex(np.exp(1j * self.omega))

    @property
    def geometric(self) -> complex:
        """z/(1−z)."""
        z = self.z
        return z / (1.0 - z)

    @property
    def tail(self) -> complex:
        """(1 − z^{−N})/(1 − z)."""
        z = self.z
        return (1.0 - z ** (-self.n)) / (1.0 - z)

    def apply(self, g, dg):
        """L[G] from G and its z-derivative G′ (scalars or arrays)."""
        return self.z * dg - self.n * g - self.tail * g

    def s_double_bar(self) -> float:
        """Boundary correction S̿_N subtracted from the TCUE assembly."""
        n, z = self.n, self.z
        one_minus = 1.0 - z
        num = 1.0 - (n + 1) * z**n + n * z ** (n + 1)
        return float(abs(num / one_minus**2) ** 2 / n - (n + 1) ** 2 / (n * abs(one_minus) ** 2))

    def s_tilde(self) -> float:
        """S̃_N = |1 − (N+1)z^N + N z^{N+1}|² / (N|1−z|⁴), always ≥ 0."""
        n, z = self.n, self.z
        num = 1.0 - (n + 1) * z**n + n * z ** (n + 1)
        return float(abs(num / (1.0 - z) ** 2) ** 2 / n)


# ---------------------------------------------------------------------------
# Master formulas
# ---------------------------------------------------------------------------


def s_stationary_from_variances(variances, mean_spacing: float, omega: float) -> float:
    """First master formula for levels with stationary spacings.

    S_N(ω) = Re L[P]/(NΔ²) with P(z) = Σ_ℓ var[ε_ℓ] z^ℓ; the z-derivative acts
    on monomials exactly.

    Raises:
        DomainError: For ω outside (0, π] or an empty variance list.
    """
    variances = np.asarray(variances, dtype=float)
    if variances.ndim != 1 or variances.size < 1:
        raise DomainError("Need var[eps_l] for l = 1..N")
    ctx = OperatorContext(variances.size, omega)
    ell = np.arange(1, variances.size + 1)
    powers = ctx.z ** (ell - 1)
    poly = np.sum(variances * powers) * ctx.z
    dpoly = np.sum(ell * variances * powers)
    return float(np.real(ctx.apply(poly, dpoly)) / (variances.size * mean_spacing**2))


def _half_line_integrals(
    provider: GfProvider,
    n: int,
    z: complex,
    panel: float,
    order: int,
    max_panels: int,
    tolerance: float,
) -> tuple[complex, complex]:
    """J = ∫_0^∞ ε(Φ − z^N) dε and dJ/dz, panel by panel until the tail is negligible."""
    zeta = 1.0 - z
    j_total, dj_total = 0j, 0j
    quiet = 0
    for k in range(max_panels):
        eps, w = composite_gauss_legendre([k * panel, (k + 1) * panel], order)
        phi, dphi = provider(eps, zeta)
        j_part = np.sum(w * eps * (phi - z**n))
        dj_part = np.sum(w * eps * (-dphi - n * z ** (n - 1)))
        j_total += j_part
        dj_total += dj_part
        scale = max(abs(j_total), abs(dj_total), 1.0)
        quiet = quiet + 1 if max(abs(j_part), abs(dj_part)) < tolerance * scale else 0
        if quiet >= 3:
            return j_total, dj_total
    raise AccuracyError(
        f"Half-line integrand did not decay within {max_panels} panels",
        estimate=float(max(abs(j_part), abs(dj_part))),
    )


def s_from_generating_fn(
    provider: GfProvider,
    mean_spacing: float,
    n: int,
    omega: float,
    order: int = 32,
    max_panels: int | None = None,
    tolerance: float = 1e-12,
) -> float:
    """Second master formula from a generating function Φ_N(ε;ζ) on the half line.

    S_N(ω) = 2/(NΔ²) Re L[z/(1−z) J(z)] − S̃_N(ω), J(z) = ∫_0^∞ ε(Φ_N(ε;1−z) − z^N) dε.

    *provider* maps ``(eps, zeta)`` to ``(Φ, ∂Φ/∂ζ)``; dζ/dz = −1.

    Raises:
        AccuracyError: If the integrand has not decayed after *max_panels* panels.
    """
    ctx = OperatorContext(n, omega)
    z = ctx.z
    max_panels = max_panels or 8 * n + 200
    j, dj = _half_line_integrals(provider, n, z, mean_spacing, order, max_panels, tolerance)
    g = ctx.geometric * j
    dg = j / (1.0 - z) ** 2 + ctx.geometric * dj
    value = 2.0 / (n * mean_spacing**2) * np.real(ctx.apply(g, dg))
    return float(value - ctx.s_tilde())


# ---------------------------------------------------------------------------
# TCUE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TcueEvaluation:
    """One TCUE power-spectrum value with its accuracy monitors.

    Attributes:
        value: S_N(ω).
        symmetry_residual: max |Φ_N(2π−φ) − z^N conj Φ_N(φ)| over mirrored nodes.
        i_n0_residual: |N∫Φ dφ/2π − I_{N,0}| on the same nodes.
        nodes: Number of φ-quadrature nodes.
    """

    n: int
    omega: float
    value: float
    symmetry_residual: float
    i_n0_residual: float
    nodes: int
    engine: str
    precision: str


def _quadrature_rule(
    n: int, omega_tilde: float, settings: TheoryConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss–Legendre rule on [0, 2π] with one panel per endpoint window."""
    delta = endpoint_window(n, settings.endpoint_margin)
    panels = max(
        16,
        math.ceil(settings.panels_per_spacing * (n + 1)),
        math.ceil(settings.panels_per_period * omega_tilde * n),
    )
    inner = np.linspace(delta, _TWO_PI - delta, panels + 1)
    edges = np.concatenate([[0.0], inner, [_TWO_PI]])
    return composite_gauss_legendre(edges, settings.gl_order)


def _reflection_residual(n: int, z: complex, values: np.ndarray) -> float:
    """Largest violation of Φ_N(2π−φ) = z^N conj Φ_N(φ) on a rule symmetric about π."""
    return float(np.max(np.abs(values[::-1] - z**n * np.conj(values)), initial=0.0))


def _gf_values(
    n: int,
    phis: np.ndarray,
    zeta: complex,
    derivative: bool,
    settings: TheoryConfig,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Φ_N (and ∂Φ/∂ζ) at the quadrature nodes, chunked over workers."""
    if settings.engine == "toeplitz":
        if n > TOEPLITZ_MAX_N:
            raise DomainError(f"engine=toeplitz supports N <= {TOEPLITZ_MAX_N}, got {n}")

        def evaluate(chunk):
            return toeplitz_values(n, chunk, zeta, derivative)

    elif settings.engine == "dpv":

        def evaluate(chunk):
            return phi_auto(
                n, chunk, zeta, derivative, settings.precision,
                settings.endpoint_margin, settings.series_tolerance,
            )

    else:
        raise DomainError(f"Unknown engine '{settings.engine}'")

    chunks = np.array_split(phis, max(1, min(workers, phis.size)))
    results = map_ordered(evaluate, chunks, workers)
    values = np.concatenate([r[0] for r in results])
    derivs = np.concatenate([r[1] for r in results]) if derivative else None
    return values, derivs


def i_n0_closed_form(n: int, zeta: complex) -> complex:
    """I_{N,0}(ζ) = (N/(N+1)) (1 − (1−ζ)^{N+1})/ζ, with the limit N at ζ = 0."""
    if zeta == 0:
        return complex(n)
    return n / (n + 1) * (1.0 - (1.0 - zeta) ** (n + 1)) / zeta


def i_n0_check(
    n: int,
    zeta: complex,
    engine: str = "dpv",
    settings: TheoryConfig | None = None,
) -> tuple[complex, complex, float]:
    """Quadrature of N∫_0^{2π} Φ_N(φ;ζ) dφ/2π against its closed form.

    Returns:
        (numeric, closed_form, residual).
    """
    settings = settings or TheoryConfig()
    settings = replace(settings, engine=engine)
    omega_tilde = abs(np.angle(1.0 - zeta)) / _TWO_PI
    phis, weights = _quadrature_rule(n, omega_tilde, settings)
    values, _ = _gf_values(n, phis, zeta, False, settings)
    numeric = complex(n * np.sum(weights * values) / _TWO_PI)
    closed = i_n0_closed_form(n, zeta)
    residual = abs(numeric - closed)
    logger.debug("I_N0 check N=%d zeta=%s residual %.3e", n, zeta, residual)
    return numeric, closed, residual


def evaluate_tcue(
    n: int,
    omega: float,
    settings: TheoryConfig | None = None,
    workers: int = 1,
) -> TcueEvaluation:
    """S_N(ω) for TCUE_N with accuracy monitors.

    J = ∫ φ Φ_N(φ;1−z) dφ/2π and J′ = −∫ φ ∂_ζΦ_N dφ/2π are integrated on the
    same nodes as the I_{N,0} identity, whose residual is the achieved
    accuracy.

    Raises:
        AccuracyError: If the I_{N,0} residual exceeds ``quad_tolerance``.
    """
    settings = settings or TheoryConfig()
    ctx = OperatorContext(n, omega)
    z = ctx.z
    zeta = 1.0 - z
    phis, weights = _quadrature_rule(n, omega / _TWO_PI, settings)
    values, derivs = _gf_values(n, phis, zeta, True, settings, workers)

    w = weights / _TWO_PI
    j = np.sum(w * phis * values)
    dj = -np.sum(w * phis * derivs)
    numeric_i0 = n * np.sum(w * values)
    residual = float(abs(numeric_i0 - i_n0_closed_form(n, zeta)))
    if residual > settings.quad_tolerance:
        raise AccuracyError(
            f"Quadrature residual {residual:.3e} above {settings.quad_tolerance:.1e} "
            f"at N={n}, omega={omega:.6g}",
            estimate=residual,
        )

    g = ctx.geometric * j
    dg = j / (1.0 - z) ** 2 + ctx.geometric * dj
    raw = (n + 1) ** 2 / (np.pi * n) * ctx.apply(g, dg)
    value = float(np.real(raw) - ctx.s_double_bar())
    symmetry_residual = _reflection_residual(n, z, values)
    if symmetry_residual > _SYMMETRY_TOLERANCE:
        logger.warning(
            "Reflection residual %.3e of Phi_N at N=%d, omega=%.6g",
            symmetry_residual, n, omega,
        )
    logger.debug(
        "S_N(%.6g) = %.12g at N=%d (%d nodes, I_N0 residual %.2e)",
        omega, value, n, phis.size, residual,
    )
    return TcueEvaluation(
        n=n,
        omega=float(omega),
        value=value,
        symmetry_residual=symmetry_residual,
        i_n0_residual=residual,
        nodes=int(phis.size),
        engine=settings.engine,
        precision=settings.precision,
    )


def s_tcue(
    n: int,
    omega: float,
    engine: str = "dpv",
    settings: TheoryConfig | None = None,
    workers: int = 1,
) -> float:
    """Exact finite-N power spectrum S_N(ω) of TCUE_N (unit mean spacing)."""
    settings = replace(settings or TheoryConfig(), engine=engine)
    return evaluate_tcue(n, omega, settings, workers).value


def s_tcue_discrete(
    n: int,
    k: int,
    engine: str = "dpv",
    settings: TheoryConfig | None = None,
) -> float:
    """S_N at ω′_k = 2πk/(N+1) from the reduced operator (z∂_z − N − 1), no S̿ term.

    Raises:
        DomainError: If k is outside 1..(N+1)/2.
    """
    if not 1 <= k <= (n + 1) // 2:
        raise DomainError(f"k must lie in 1..{(n + 1) // 2}, got {k}")
    settings = replace(settings or TheoryConfig(), engine=engine)
    omega = _TWO_PI * k / (n + 1)
    z = complex(np.exp(1j * omega))
    phis, weights = _quadrature_rule(n, omega / _TWO_PI, settings)
    values, derivs = _gf_values(n, phis, 1.0 - z, True, settings)
    w = weights / _TWO_PI
    j = np.sum(w * phis * values)
    dj = -np.sum(w * phis * derivs)
    g = z / (1.0 - z) * j
    dg = j / (1.0 - z) ** 2 + z / (1.0 - z) * dj
    return float((n + 1) ** 2 / (np.pi * n) * np.real(z * dg - (n + 1) * g))


def s_tcue_curve(
    n: int,
    omegas,
    settings: TheoryConfig | None = None,
    workers: int = 1,
) -> SpectrumCurve:
    """TCUE theory curve on a frequency grid, one work item per frequency."""
    settings = settings or TheoryConfig()
    omegas = np.asarray(omegas, dtype=float)
    logger.info(
        "TCUE theory: N=%d, %d frequencies, engine=%s, precision=%s",
        n, omegas.size, settings.engine, settings.precision,
    )
    results = map_ordered(lambda w: evaluate_tcue(n, float(w), settings), omegas, workers)
    return SpectrumCurve(
        x=omegas,
        values=np.array([r.value for r in results]),
        provenance=Provenance.TCUE_THEORY,
        meta={
            "n": n,
            "engine": settings.engine,
            "precision": settings.precision,
            "max_symmetry_residual": max((r.symmetry_residual for r in results), default=0.0),
            "max_i_n0_residual": max((r.i_n0_residual for r in results), default=0.0),
        },
    )
