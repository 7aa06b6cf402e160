"""Exact finite-N evaluation of the TCUE generating function.

Φ_N(φ;ζ) = Σ_ℓ (1−ζ)^ℓ E_N(ℓ;φ), where E_N(ℓ;φ) is the probability of
finding exactly ℓ of the N free eigenangles of TCUE_N in (0, φ). This module
provides the independent routes used to validate the dPV engine:

- the Toeplitz determinant of closed-form moments (reference oracle),
- brute-force tensor quadrature of the joint density (N ≤ 3),
- the Fredholm determinant of the TCUE kernel,

together with the kernel, correlation functions, Szegő–Askey polynomials and
probability extraction.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from powerspec.errors import (
    ConditioningError,
    ConsistencyError,
    DomainError,
    UnsupportedError,
)

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi

#: Largest Toeplitz size accepted by the determinant route.
TOEPLITZ_MAX_N = 256

# Complex entries per batched determinant block.
_BATCH_ENTRIES = 1 << 22


@dataclass(frozen=True)
class GfPoint:
    """One evaluation of the generating function.

    Attributes:
        n: Number of free angles N.
        phi: Interval length φ in [0, 2π].
        zeta: Deformation parameter (typically 1 − e^{iω}).
        value: Φ_N(φ;ζ).
        dvalue: ∂Φ_N/∂ζ, when requested.
    """

    n: int
    phi: float
    zeta: complex
    value: complex
    dvalue: complex | None = None


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------


def gauss_legendre(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre nodes and weights mapped to [a, b]."""
    x, w = leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(edges, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated Gauss–Legendre rules on consecutive panels [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    x, w = leggauss(order)
    left = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = left + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


# ---------------------------------------------------------------------------
# Toeplitz route
# ---------------------------------------------------------------------------


def _partial_power(m, phi):
    """∫_0^φ e^{−imθ} dθ/2π, vectorized over broadcast (m, φ)."""
    m = np.asarray(m)
    phi = np.asarray(phi, dtype=float)
    safe = np.where(m == 0, 1, m)
    oscillating = 1j * (np.exp(-1j * safe * phi) - 1.0) / (_TWO_PI * safe)
    return np.where(m == 0, phi / _TWO_PI + 0j, oscillating)


def _full_moment(k) -> np.ndarray:
    k = np.asarray(k)
    return 2.0 * (k == 0) - 1.0 * (np.abs(k) == 1)


def _moment_slope(k, phi):
    """∂M_k/∂ζ = −∫_0^φ |1−e^{iθ}|² e^{−ikθ} dθ/2π."""
    return -(2.0 * _partial_power(k, phi) - _partial_power(k - 1, phi) - _partial_power(k + 1, phi))


def toeplitz_moment(k: int, phi, zeta):
    """M_k(φ;ζ) = (∫_0^{2π} − ζ∫_0^φ) |1−e^{iθ}|² e^{−ikθ} dθ/2π in closed form."""
    k = np.asarray(k)
    value = _full_moment(k) + np.asarray(zeta) * _moment_slope(k, phi)
    return complex(value) if np.ndim(value) == 0 else value


def _check_toeplitz_size(n: int) -> None:
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    if n > TOEPLITZ_MAX_N:
        raise UnsupportedError(f"Toeplitz route supports N <= {TOEPLITZ_MAX_N}, got {n}")


def toeplitz_values(
    n: int, phi, zeta, derivative: bool = False
) -> tuple[np.ndarray, np.ndarray | None]:
    """Φ_N and optionally ∂Φ_N/∂ζ on broadcast arrays of (φ, ζ).

    The derivative uses d det M/dζ = det M · tr(M^{-1} dM/dζ).

    Raises:
        UnsupportedError: For N above :data:`TOEPLITZ_MAX_N`.
        ConditioningError: If a moment matrix is singular during the derivative.
    """
    _check_toeplitz_size(n)
    phi, zeta = np.broadcast_arrays(
        np.atleast_1d(np.asarray(phi, dtype=float)), np.atleast_1d(np.asarray(zeta, dtype=complex))
    )
    phi, zeta = phi.ravel(), zeta.ravel()
    ks = np.arange(-(n - 1), n)
    index = np.subtract.outer(np.arange(n), np.arange(n)) + (n - 1)

    values = np.empty(phi.size, dtype=complex)
    derivs = np.empty(phi.size, dtype=complex) if derivative else None
    step = max(1, _BATCH_ENTRIES // (n * n))
    for start in range(0, phi.size, step):
        sl = slice(start, start + step)
        slope = _moment_slope(ks[None, :], phi[sl, None])
        moments = _full_moment(ks)[None, :] + zeta[sl, None] * slope
        matrix = moments[:, index]
        det = np.linalg.det(matrix)
        values[sl] = det / (n + 1)
        if derivative:
            try:
                ratio = np.linalg.solve(matrix, slope[:, index])
            except np.linalg.LinAlgError as e:
                raise ConditioningError(
                    f"Singular Toeplitz matrix at N={n} during the derivative"
                ) from e
            derivs[sl] = values[sl] * np.trace(ratio, axis1=1, axis2=2)
    return values, derivs


def phi_toeplitz(n: int, phi: float, zeta: complex, derivative: bool = True) -> GfPoint:
    """Φ_N(φ;ζ) as (N+1)^{-1} det[M_{j−k}] with its ζ-derivative."""
    values, derivs = toeplitz_values(n, phi, zeta, derivative)
    return GfPoint(
        n=n,
        phi=float(phi),
        zeta=complex(zeta),
        value=complex(values[0]),
        dvalue=None if derivs is None else complex(derivs[0]),
    )


# ---------------------------------------------------------------------------
# Brute force
# ---------------------------------------------------------------------------


def phi_bruteforce(n: int, phi: float, zeta: complex, order: int = 24) -> complex:
    """Φ_N by tensor Gauss–Legendre quadrature of the TCUE joint density.

    The density of the N unordered free angles is
    Π_{i<j}|e^{iθ_i}−e^{iθ_j}|² Π_j|1−e^{iθ_j}|² / (N+1)! with respect to
    Π dθ_j/2π on the full cube. Each axis is split at φ.

    Raises:
        UnsupportedError: For N > 3.
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    if n > 3:
        raise UnsupportedError(f"Brute-force quadrature supports N <= 3, got {n}")
    if not 0.0 <= phi <= _TWO_PI:
        raise DomainError(f"phi must lie in [0, 2pi], got {phi}")

    inner_x, inner_w = gauss_legendre(0.0, phi, order)
    outer_x, outer_w = gauss_legendre(phi, _TWO_PI, order)
    theta = np.concatenate([inner_x, outer_x])
    weight = np.concatenate([inner_w, outer_w]) / _TWO_PI
    factor = np.concatenate([np.full(order, 1.0 - zeta), np.ones(order)])

    def along(axis: int, values: np.ndarray) -> np.ndarray:
        shape = [1] * n
        shape[axis] = values.size
        return values.reshape(shape)

    total = np.ones([1] * n, dtype=complex)
    for i in range(n):
        ti = along(i, theta)
        total = total * along(i, weight * factor) * (2.0 - 2.0 * np.cos(ti))
        for j in range(i + 1, n):
            total = total * (2.0 - 2.0 * np.cos(ti - along(j, theta)))
    return complex(total.sum() / math.factorial(n + 1))


# ---------------------------------------------------------------------------
# Probabilities
# ---------------------------------------------------------------------------


def extract_probabilities(n: int, phi: float, tolerance: float = 1e-9) -> np.ndarray:
    """E_N(ℓ;φ) for ℓ = 0..N from Φ at the (N+1)-th roots of unity in x = 1−ζ.

    Raises:
        UnsupportedError: For N > 64.
        ConsistencyError: If a coefficient is below −tolerance.
    """
    if n > 64:
        raise UnsupportedError(f"Probability extraction supports N <= 64, got {n}")
    roots = np.exp(_TWO_PI * 1j * np.arange(n + 1) / (n + 1))
    values, _ = toeplitz_values(n, phi, 1.0 - roots)
    probs = np.fft.fft(values) / (n + 1)
    logger.debug("E_N imaginary residue at N=%d, phi=%.6g: %.3e", n, phi, np.abs(probs.imag).max())
    probs = probs.real
    if probs.min() < -tolerance:
        raise ConsistencyError(
            f"Negative probability {probs.min():.3e} at N={n}, phi={phi}",
            estimate=float(-probs.min()),
        )
    return probs


def mean_count(n: int, phi) -> np.ndarray | float:
    """Expected number of free angles in (0, φ); equals −∂Φ_N/∂ζ at ζ = 0."""
    phi = np.asarray(phi, dtype=float)
    m = np.arange(1, n + 1)
    weights = (n + 1 - m) / m
    series = np.sin(np.multiply.outer(phi, m)) @ weights
    value = n * phi / _TWO_PI - series / (np.pi * (n + 1))
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# Kernel and correlation functions
# ---------------------------------------------------------------------------


def sine_kernel(m: int, x):
    """𝒮_m(x) = sin(mx/2)/sin(x/2) with the analytic limit at x ∈ 2πℤ."""
    x = np.asarray(x, dtype=float)
    half = np.sin(x / 2.0)
    near = np.abs(half) < 1e-8
    safe = np.where(near, 1.0, half)
    regular = np.sin(m * x / 2.0) / safe
    limit = m * np.cos(m * x / 2.0) / np.cos(x / 2.0)
    return np.where(near, limit, regular)


def tcue_kernel(n: int, theta, theta_prime):
    """κ_N(θ,θ′) = 𝒮_{N+1}(θ−θ′) − 𝒮_{N+1}(θ)𝒮_{N+1}(θ′)/(N+1)."""
    theta = np.asarray(theta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    m = n + 1
    value = sine_kernel(m, theta - theta_prime) - sine_kernel(m, theta) * sine_kernel(
        m, theta_prime
    ) / m
    return float(value) if np.ndim(value) == 0 else value


def correlation_function(n: int, thetas) -> float:
    """ℓ-point correlation function det[κ_N(θ_i, θ_j)] of TCUE_N."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    return float(np.linalg.det(tcue_kernel(n, thetas[:, None], thetas[None, :])))


def correlation_function_bordered(n: int, thetas) -> float:
    """Same correlation function from the bordered sine-kernel determinant.

    The (ℓ+1)-point CUE_{N+1} determinant with the extra angle pinned at 0,
    divided by the one-point density N+1.
    """
    thetas = np.append(np.atleast_1d(np.asarray(thetas, dtype=float)), 0.0)
    matrix = sine_kernel(n + 1, thetas[:, None] - thetas[None, :])
    return float(np.linalg.det(matrix) / (n + 1))


# ---------------------------------------------------------------------------
# Szegő–Askey polynomials
# ---------------------------------------------------------------------------


def _askey_norm(ell: int) -> float:
    return math.sqrt(2.0 / ((ell + 1) * (ell + 2)))


def szego_askey(ell: int, z):
    """ψ_ℓ(z) = √(2/((ℓ+1)(ℓ+2))) Σ_{j=1}^{ℓ+1} j z^{j−1}.

    Orthonormal on the unit circle with weight W = 1 − cos θ and measure dθ/2π.
    """
    if ell < 0:
        raise DomainError(f"Polynomial degree must be >= 0, got {ell}")
    coeffs = np.arange(1, ell + 2, dtype=float)
    value = _askey_norm(ell) * np.polynomial.polynomial.polyval(np.asarray(z), coeffs)
    return complex(value) if np.ndim(value) == 0 else value


def szego_askey_reciprocal(ell: int, z):
    """Reciprocal polynomial ψ*_ℓ(z) = z^ℓ conj(ψ_ℓ(1/z̄))."""
    if ell < 0:
        raise DomainError(f"Polynomial degree must be >= 0, got {ell}")
    coeffs = np.arange(ell + 1, 0, -1, dtype=float)
    value = _askey_norm(ell) * np.polynomial.polynomial.polyval(np.asarray(z), coeffs)
    return complex(value) if np.ndim(value) == 0 else value


def szego_askey_kernel(n: int, theta: float, theta_prime: float, form: str = "sum") -> complex:
    """Weighted reproducing kernel √(W(θ)W(θ′)) Σ_{ℓ<N} ψ_ℓ(z) conj ψ_ℓ(w).

    ``form="darboux"`` evaluates the Christoffel–Darboux closed form
    (ψ_N(z) conj ψ_N(w) − ψ*_N(z) conj ψ*_N(w)) / (w̄z − 1), which is
    undefined at θ = θ′.
    """
    z, w = np.exp(1j * theta), np.exp(1j * theta_prime)
    weight = math.sqrt((1.0 - math.cos(theta)) * (1.0 - math.cos(theta_prime)))
    if form == "sum":
        total = sum(szego_askey(ell, z) * np.conj(szego_askey(ell, w)) for ell in range(n))
    elif form == "darboux":
        denom = np.conj(w) * z - 1.0
        if abs(denom) < 1e-14:
            raise DomainError("Christoffel-Darboux form is undefined at coincident angles")
        total = (
            szego_askey(n, z) * np.conj(szego_askey(n, w))
            - szego_askey_reciprocal(n, z) * np.conj(szego_askey_reciprocal(n, w))
        ) / denom
    else:
        raise DomainError(f"Unknown kernel form '{form}'")
    return complex(weight * total)


# ---------------------------------------------------------------------------
# Fredholm route
# ---------------------------------------------------------------------------


def phi_fredholm(
    n: int, phi: float, zeta: complex, method: str = "nystrom", order: int | None = None
) -> complex:
    """Φ_N(φ;ζ) = det(I − ζ κ_N) on L²((0,φ), dθ/2π).

    ``expansion`` sums the finite series Σ_{ℓ≤N} (−ζ)^ℓ/ℓ! ∫ det[κ_N] by
    ℓ-fold tensor quadrature (N ≤ 3). ``nystrom`` discretizes the operator
    on Gauss–Legendre nodes and takes a matrix determinant.

    Raises:
        UnsupportedError: For ``expansion`` with N > 3.
        DomainError: For an unknown method.
    """
    if not 0.0 <= phi <= _TWO_PI:
        raise DomainError(f"phi must lie in [0, 2pi], got {phi}")
    order = order or max(24, 4 * n + 16)
    x, w = gauss_legendre(0.0, phi, order)
    w = w / _TWO_PI
    kernel = tcue_kernel(n, x[:, None], x[None, :])

    if method == "nystrom":
        root = np.sqrt(w)
        matrix = np.eye(order) - zeta * (root[:, None] * kernel * root[None, :])
        return complex(np.linalg.det(matrix))
    if method != "expansion":
        raise DomainError(f"Unknown Fredholm method '{method}'")
    if n > 3:
        raise UnsupportedError(f"Fredholm expansion supports N <= 3, got {n}")

    total = 1.0 + 0j
    for ell in range(1, n + 1):
        tuples = np.array(list(itertools.product(range(order), repeat=ell)))
        blocks = kernel[tuples[:, :, None], tuples[:, None, :]]
        integral = np.sum(np.linalg.det(blocks) * np.prod(w[tuples], axis=1))
        total += (-zeta) ** ell / math.factorial(ell) * integral
    return complex(total)
