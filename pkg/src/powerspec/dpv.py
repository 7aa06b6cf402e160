"""Discrete Painlevé V (dPV) evaluation of the TCUE generating function.

Φ_N(φ;ζ) is propagated in N by two coupled first-order recurrences for the
variables (g, f) and (ḡ, f̄), from which the reflection coefficients r, r̄ and
the ratio Φ_{N+1}Φ_{N−1}/Φ_N² = (N+1)²/(N(N+2)) (1 − r_N r̄_N) follow. Every
quadrature node is one lane of a vectorized state, so one step advances all
nodes at once.

Precision is ``double`` (complex128) or ``extended`` (double-double). The
ζ-derivative is carried by forward-mode dual numbers through every step.
Near the endpoints φ = 0 and φ = 2π the recurrence degenerates and
:func:`phi_series` takes over.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any

import mpmath
import numpy as np

from powerspec.ddarith import Dual, ExtComplex, leading, to_complex, value_of
from powerspec.errors import AccuracyError, DomainError, EndpointError, SingularStepError
from powerspec.oracles import (
    TOEPLITZ_MAX_N,
    GfPoint,
    mean_count,
    toeplitz_moment,
    toeplitz_values,
)

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi
_INIT_DPS = 40
_TINY = 1e-280

#: Default endpoint margin; δ_end = DEFAULT_MARGIN / N.
DEFAULT_MARGIN = 0.2
#: Default acceptance threshold for the boundary-series next-term estimate.
DEFAULT_SERIES_TOLERANCE = 1e-10


def endpoint_window(n: int, margin: float = DEFAULT_MARGIN) -> float:
    """Width δ_end of the endpoint windows handled by the boundary series."""
    return margin / max(n, 1)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


def initial_weights(phi, zeta) -> tuple:
    """Moments (w₀, w₋₁, w₊₁) = (M_0, −M_1, −M_{−1}) seeding the recurrence.

    Raises:
        EndpointError: If φ is not strictly inside (0, 2π).
    """
    phi_arr = np.asarray(phi, dtype=float)
    if np.any(phi_arr <= 0.0) or np.any(phi_arr >= _TWO_PI):
        raise EndpointError("Initial weights need phi strictly inside (0, 2pi)")
    return (
        toeplitz_moment(0, phi, zeta),
        -toeplitz_moment(1, phi, zeta),
        -toeplitz_moment(-1, phi, zeta),
    )


def _partial_power_mp(m: int, phi):
    if m == 0:
        return phi / (2 * mpmath.pi)
    return 1j * (mpmath.expj(-m * phi) - 1) / (2 * mpmath.pi * m)


def _moment_slope_mp(k: int, phi):
    return -(2 * _partial_power_mp(k, phi) - _partial_power_mp(k - 1, phi)
             - _partial_power_mp(k + 1, phi))


def _initial_data_extended(phis: np.ndarray, zeta: complex) -> dict[str, ExtComplex]:
    """t and the weights with their ζ-slopes, at 40 digits, rounded to double-double."""
    columns: dict[str, list] = {key: [] for key in ("t", "w0", "wm", "wp", "dw0", "dwm", "dwp")}
    with mpmath.workdps(_INIT_DPS):
        z = mpmath.mpc(zeta)
        for phi in phis:
            ph = mpmath.mpf(float(phi))
            slopes = {k: _moment_slope_mp(k, ph) for k in (-1, 0, 1)}
            columns["t"].append(mpmath.expj(ph))
            columns["w0"].append(2 + z * slopes[0])
            columns["wm"].append(1 - z * slopes[1])
            columns["wp"].append(1 - z * slopes[-1])
            columns["dw0"].append(slopes[0])
            columns["dwm"].append(-slopes[1])
            columns["dwp"].append(-slopes[-1])
        return {key: ExtComplex.from_mpc(values) for key, values in columns.items()}


def _initial_data_double(phis: np.ndarray, zeta: complex) -> dict[str, np.ndarray]:
    slopes = {k: toeplitz_moment(k, phis, 1.0) - toeplitz_moment(k, phis, 0.0) for k in (-1, 0, 1)}
    return {
        "t": np.exp(1j * phis),
        "w0": 2.0 + zeta * slopes[0],
        "wm": 1.0 - zeta * slopes[1],
        "wp": 1.0 - zeta * slopes[-1],
        "dw0": slopes[0],
        "dwm": -slopes[1],
        "dwp": -slopes[-1],
    }


# ---------------------------------------------------------------------------
# Recurrence state
# ---------------------------------------------------------------------------


@dataclass
class DpvState:
    """Recurrence state at index N, one lane per angle.

    Field values are ``ExtComplex`` (extended) or complex ndarrays (double),
    wrapped in :class:`~powerspec.ddarith.Dual` when the ζ-derivative is carried.

    Attributes:
        n: Current index N.
        phi: Angles of the lanes.
        zeta: Deformation parameter.
        t: e^{iφ}.
        g, gbar: dPV variables g_N, ḡ_N.
        f, fbar: f_{N−1}, f̄_{N−1}.
        r, rbar: Reflection coefficients r_{N−1}, r̄_{N−1}.
        ratio: Φ_N/Φ_{N−1}.
        phi_prev, phi_cur: Φ_{N−1}, Φ_N.
    """

    n: int
    phi: np.ndarray
    zeta: complex
    t: Any
    g: Any
    gbar: Any
    f: Any
    fbar: Any
    r: Any
    rbar: Any
    ratio: Any
    phi_prev: Any
    phi_cur: Any


def initial_state(
    phis, zeta: complex, derivative: bool = False, precision: str = "extended"
) -> DpvState:
    """State at N = 1: Φ_1 = w₀/2, g₁ and ḡ₁ from the weights, f₀ = f̄₀ = 0, r₀ = r̄₀ = 1.

    Raises:
        EndpointError: If an angle is not strictly inside (0, 2π).
        DomainError: For an unknown precision.
    """
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    initial_weights(phis, zeta)
    if precision == "extended":
        data = _initial_data_extended(phis, zeta)
    elif precision == "double":
        data = _initial_data_double(phis, zeta)
    else:
        raise DomainError(f"Unknown precision '{precision}'")

    t = data["t"]
    if derivative:
        w0 = Dual(data["w0"], data["dw0"])
        wm = Dual(data["wm"], data["dwm"])
        wp = Dual(data["wp"], data["dwp"])
    else:
        w0, wm, wp = data["w0"], data["wm"], data["wp"]

    zero = t * 0.0
    one = zero + 1.0
    if derivative:
        zero, one = Dual(zero, zero), Dual(one, zero)

    phi_1 = w0 / 2
    g = t * (w0 - 2 * wm) / (w0 - 2 * (t * wm))
    gbar = (w0 - 2 * (wp / t)) / (w0 - 2 * wp)
    return DpvState(
        n=1,
        phi=phis,
        zeta=complex(zeta),
        t=t,
        g=g,
        gbar=gbar,
        f=zero,
        fbar=zero,
        r=one,
        rbar=one,
        ratio=phi_1,
        phi_prev=one,
        phi_cur=phi_1,
    )


def _guard(state: DpvState, name: str, value) -> None:
    lead = leading(value)
    bad = ~np.isfinite(lead) | (np.abs(lead) <= _TINY)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise SingularStepError(
            f"Singular dPV denominator {name} at phi={state.phi[idx]!r}",
            n=state.n,
            phi=float(state.phi[idx]),
            zeta=state.zeta,
        )


def dpv_advance(state: DpvState) -> DpvState:
    """Advance the recurrence from N to N+1.

    Raises:
        SingularStepError: If a denominator vanishes or a value is not finite.
    """
    n, t = state.n, state.t
    g, gbar = state.g, state.gbar

    denominators = {
        "g-1": g - 1,
        "g-t": g - t,
        "gbar-1": gbar - 1,
        "gbar-1/t": gbar - 1 / t,
        "t*gbar-1": t * gbar - 1,
    }
    for name, value in denominators.items():
        _guard(state, name, value)

    r = state.r * (1 - g / t) / denominators["g-1"] * n / (n + 1)
    rbar = state.rbar * (1 - gbar) / denominators["gbar-1/t"] * n / (n + 1)
    ratio = state.ratio * (1 - r * rbar) * ((n + 1) ** 2) / (n * (n + 2))
    phi_next = state.phi_cur * ratio

    f = -state.f + 2 + n / denominators["g-1"] + (t * (n + 1)) / denominators["g-t"]
    fbar = -state.fbar + (n + 1) / denominators["gbar-1"] + n / denominators["t*gbar-1"]
    _guard(state, "f", f)
    _guard(state, "f-2", f - 2)
    _guard(state, "fbar", fbar)

    g_next = t * (f + n) * (f + n) / (f * (f - 2)) / g
    gbar_next = (fbar + n) * (fbar + (n + 2)) / (fbar * fbar * t * gbar)

    return DpvState(
        n=n + 1,
        phi=state.phi,
        zeta=state.zeta,
        t=t,
        g=g_next,
        gbar=gbar_next,
        f=f,
        fbar=fbar,
        r=r,
        rbar=rbar,
        ratio=ratio,
        phi_prev=state.phi_cur,
        phi_cur=phi_next,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass
class DpvDiagnostics:
    """Per-run monitor data, serializable with :meth:`to_dict`.

    Attributes:
        n: Final index.
        precision: ``double`` or ``extended``.
        nodes: Number of lanes.
        max_abs_phi: Largest |Φ_k| over lanes after each step k = 1..N.
        bound_violations: Lanes with |Φ_N| > 1 on |1−ζ| = 1.
        divergence: First N where double and extended differ by more than
            the threshold, per lane (None if never), when monitored.
    """

    n: int
    precision: str
    nodes: int
    max_abs_phi: list[float] = field(default_factory=list)
    bound_violations: int = 0
    divergence: list[int | None] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _run(state: DpvState, n: int, diagnostics: DpvDiagnostics | None) -> DpvState:
    if diagnostics is not None:
        diagnostics.max_abs_phi.append(float(np.abs(leading(state.phi_cur)).max()))
    while state.n < n:
        state = dpv_advance(state)
        if diagnostics is not None:
            diagnostics.max_abs_phi.append(float(np.abs(leading(state.phi_cur)).max()))
    return state


def _check_bound(values: np.ndarray, zeta: complex, diagnostics: DpvDiagnostics | None) -> None:
    if abs(abs(1.0 - zeta) - 1.0) > 1e-12:
        return
    violations = int(np.count_nonzero(np.abs(values) > 1.0 + 1e-9))
    if violations:
        logger.warning(
            "|Phi_N| > 1 at %d of %d nodes on |1 - zeta| = 1 (max %.3e)",
            violations, values.size, np.abs(values).max(),
        )
    if diagnostics is not None:
        diagnostics.bound_violations = violations


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def dpv_values(
    n: int,
    phis,
    zeta: complex,
    derivative: bool = False,
    precision: str = "extended",
    margin: float = DEFAULT_MARGIN,
    diagnostics: DpvDiagnostics | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Φ_N (and ∂Φ_N/∂ζ) at every angle in *phis* by the dPV recurrence.

    Raises:
        EndpointError: If an angle lies within δ_end of 0 or 2π.
        SingularStepError: If the recurrence hits a singular denominator.
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    delta = endpoint_window(n, margin)
    if np.any(phis < delta) or np.any(phis > _TWO_PI - delta):
        raise EndpointError(
            f"dPV needs phi in [{delta:.3g}, 2pi - {delta:.3g}] at N={n}; use phi_series"
        )

    if zeta == 0:
        derivs = -np.asarray(mean_count(n, phis), dtype=complex) if derivative else None
        return np.ones(phis.size, dtype=complex), derivs

    state = _run(initial_state(phis, zeta, derivative, precision), n, diagnostics)
    values = to_complex(value_of(state.phi_cur))
    derivs = to_complex(state.phi_cur.deriv) if derivative else None
    _check_bound(values, zeta, diagnostics)
    logger.debug("dPV N=%d over %d nodes (%s)", n, phis.size, precision)
    return values, derivs


def phi_dpv(
    n: int,
    phi: float,
    zeta: complex,
    want_derivative: bool = False,
    precision: str = "extended",
    margin: float = DEFAULT_MARGIN,
) -> GfPoint:
    """Φ_N(φ;ζ) at one angle by the dPV recurrence; see :func:`dpv_values`."""
    values, derivs = dpv_values(n, phi, zeta, want_derivative, precision, margin)
    return GfPoint(
        n=n,
        phi=float(phi),
        zeta=complex(zeta),
        value=complex(values[0]),
        dvalue=None if derivs is None else complex(derivs[0]),
    )


def precision_divergence(
    n: int, phis, zeta: complex, threshold: float = 1e-8
) -> list[int | None]:
    """First index where double and extended recurrences differ by more than *threshold*."""
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    low = initial_state(phis, zeta, precision="double")
    high = initial_state(phis, zeta, precision="extended")
    first: list[int | None] = [None] * phis.size
    while True:
        diff = np.abs(to_complex(low.phi_cur) - to_complex(high.phi_cur))
        for lane in np.flatnonzero(diff > threshold):
            if first[lane] is None:
                first[lane] = low.n
        if low.n >= n:
            break
        low, high = dpv_advance(low), dpv_advance(high)
    logger.debug("Precision divergence at N=%d: %s", n, first)
    return first


def diagnose(
    n: int, phis, zeta: complex, precision: str = "extended", threshold: float = 1e-8
) -> DpvDiagnostics:
    """Run the recurrence with monitors enabled and the precision comparison."""
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    diagnostics = DpvDiagnostics(n=n, precision=precision, nodes=phis.size)
    dpv_values(n, phis, zeta, precision=precision, diagnostics=diagnostics)
    diagnostics.divergence = precision_divergence(n, phis, zeta, threshold)
    return diagnostics


# ---------------------------------------------------------------------------
# Boundary series
# ---------------------------------------------------------------------------


def _boundary_integrals(phi: float) -> tuple[float, float, float]:
    """Closed-form angle integrals multiplying σ₂, σ₄, σ₅ in the large-t ansatz."""
    with mpmath.workdps(30):
        half = mpmath.mpf(float(phi)) / 2
        tan = mpmath.tan(half)
        a2 = tan - half
        a4 = tan**3 / 3 - tan + half
        a5 = tan**4 / 4 - tan**2 / 2 - mpmath.log(mpmath.cos(half))
        return float(a2), float(a4), float(a5)


def _series_near_zero(n: int, phi: float, zeta: complex, tolerance: float):
    cubic = n * (n + 1) * (n + 2) / (3.0 * np.pi)
    k4 = -(2 * n * n + 4 * n + 9) / 15.0
    a2, a4, a5 = _boundary_integrals(phi)
    sigma2 = zeta * cubic
    lead = sigma2 * a2
    second = k4 * sigma2 * a4
    estimate = abs(second) ** 2 / abs(lead) if lead != 0 else 0.0
    if estimate > tolerance:
        raise AccuracyError(
            f"Boundary series outside its radius at N={n}, phi={phi:.3g}", estimate=estimate
        )
    exponent = lead + second + sigma2 * sigma2 / 3.0 * a5
    value = np.exp(-exponent)
    dexponent = cubic * a2 + cubic * k4 * a4 + 2.0 * sigma2 * cubic / 3.0 * a5
    return complex(value), complex(-value * dexponent)


def phi_series(
    n: int,
    phi: float,
    zeta: complex,
    want_derivative: bool = False,
    tolerance: float = DEFAULT_SERIES_TOLERANCE,
) -> GfPoint:
    """Φ_N near an endpoint from the truncated large-t boundary expansion.

    Near 2π the reflection Φ_N(2π−φ;ζ) = (1−ζ)^N Φ_N(φ; ζ/(ζ−1)) is used.

    Raises:
        AccuracyError: If the next-term estimate exceeds *tolerance*.
        DomainError: For ζ = 1 on the near-2π side.
    """
    if not 0.0 <= phi <= _TWO_PI:
        raise DomainError(f"phi must lie in [0, 2pi], got {phi}")
    if phi <= np.pi:
        value, dvalue = _series_near_zero(n, phi, zeta, tolerance)
    else:
        if zeta == 1:
            raise DomainError("The near-2pi boundary series needs zeta != 1")
        eta = zeta / (zeta - 1.0)
        inner, dinner = _series_near_zero(n, _TWO_PI - phi, eta, tolerance)
        weight = (1.0 - zeta) ** n
        value = weight * inner
        dvalue = -n * (1.0 - zeta) ** (n - 1) * inner - weight * dinner / (zeta - 1.0) ** 2
    return GfPoint(
        n=n,
        phi=float(phi),
        zeta=complex(zeta),
        value=value,
        dvalue=dvalue if want_derivative else None,
    )


def phi_auto(
    n: int,
    phis,
    zeta: complex,
    derivative: bool = False,
    precision: str = "extended",
    margin: float = DEFAULT_MARGIN,
    tolerance: float = DEFAULT_SERIES_TOLERANCE,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Φ_N over arbitrary angles: boundary series inside δ_end, dPV elsewhere.

    At small N the endpoint windows are wide enough that the series can be
    outside its radius; those nodes fall back to the Toeplitz determinant when
    N is within its size limit.

    Raises:
        AccuracyError: If the series is outside its radius and N > TOEPLITZ_MAX_N.
    """
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    delta = endpoint_window(n, margin)
    edge = (phis < delta) | (phis > _TWO_PI - delta)
    values = np.empty(phis.size, dtype=complex)
    derivs = np.empty(phis.size, dtype=complex) if derivative else None

    for idx in np.flatnonzero(edge):
        try:
            point = phi_series(n, float(phis[idx]), zeta, derivative, tolerance)
        except AccuracyError:
            if n > TOEPLITZ_MAX_N:
                raise
            logger.debug("Series out of radius at N=%d, phi=%.3g; using Toeplitz", n, phis[idx])
            value, dvalue = toeplitz_values(n, phis[idx], zeta, derivative)
            values[idx] = value[0]
            if derivative:
                derivs[idx] = dvalue[0]
            continue
        values[idx] = point.value
        if derivative:
            derivs[idx] = point.dvalue
    if np.any(~edge):
        inner_values, inner_derivs = dpv_values(
            n, phis[~edge], zeta, derivative, precision, margin
        )
        values[~edge] = inner_values
        if derivative:
            derivs[~edge] = inner_derivs
    return values, derivs
