"""Cross-oracle verification suites.

Each suite runs a table of independent evaluations of the same quantity and
reports the largest deviation against its tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from powerspec.dpv import dpv_values, endpoint_window, phi_series
from powerspec.errors import UsageError
from powerspec.oracles import (
    correlation_function,
    correlation_function_bordered,
    extract_probabilities,
    phi_bruteforce,
    phi_fredholm,
    toeplitz_values,
)
from powerspec.theory import i_n0_check

logger = logging.getLogger(__name__)

SUITES = ("oracles", "dpv", "pipeline", "all")

_PHIS = (0.5, 1.7, np.pi, 4.1, 5.0)
_OMEGAS = (0.3, 1.0, 2.5)


@dataclass
class CheckResult:
    name: str
    max_deviation: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_deviation)) and self.max_deviation <= self.tolerance


@dataclass
class SuiteReport:
    suite: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "checks": [{**asdict(c), "passed": c.passed} for c in self.checks],
        }


def _check(name: str, tolerance: float, deviations: list[float]) -> CheckResult:
    result = CheckResult(
        name=name,
        max_deviation=float(max(deviations, default=0.0)),
        tolerance=tolerance,
        cases=len(deviations),
    )
    logger.info(
        "%-34s max dev %.3e (tol %.1e, %d cases) %s",
        name, result.max_deviation, tolerance, result.cases, "ok" if result.passed else "FAIL",
    )
    return result


def _zeta(omega: float) -> complex:
    return complex(1.0 - np.exp(1j * omega))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_oracles(quick: bool = False) -> SuiteReport:
    report = SuiteReport("oracles")
    rng = np.random.default_rng(7)

    devs = []
    for n in (1, 2, 3):
        for phi in (0.5, np.pi, 5.0):
            for omega in _OMEGAS:
                zeta = _zeta(omega)
                exact, _ = toeplitz_values(n, phi, zeta)
                devs.append(abs(phi_bruteforce(n, phi, zeta) - exact[0]))
    report.checks.append(_check("toeplitz vs brute force", 1e-8, devs))

    devs = []
    for n in (2, 4, 6):
        for phi in (0.5, np.pi, 5.0):
            for omega in _OMEGAS:
                zeta = _zeta(omega)
                exact, _ = toeplitz_values(n, phi, zeta)
                devs.append(abs(phi_fredholm(n, phi, zeta) - exact[0]))
    report.checks.append(_check("toeplitz vs fredholm", 1e-8, devs))

    devs, sums = [], []
    for n in (2, 3):
        for phi in (0.5, np.pi, 5.0):
            probs = extract_probabilities(n, phi)
            roots = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
            brute = np.array([phi_bruteforce(n, phi, 1.0 - x) for x in roots])
            devs.append(float(np.max(np.abs(np.fft.fft(brute).real / (n + 1) - probs))))
            sums.append(abs(probs.sum() - 1.0))
    report.checks.append(_check("probabilities vs brute force", 1e-7, devs))
    report.checks.append(_check("probabilities sum to one", 1e-10, sums))

    devs = []
    for n in (2, 5, 8):
        for ell in (1, 2):
            thetas = rng.uniform(0.0, 2.0 * np.pi, ell)
            devs.append(
                abs(correlation_function(n, thetas) - correlation_function_bordered(n, thetas))
            )
    report.checks.append(_check("kernel vs bordered determinant", 1e-10, devs))
    return report


def suite_dpv(quick: bool = False) -> SuiteReport:
    report = SuiteReport("dpv")
    sizes = (2, 8, 32) if quick else (2, 8, 32, 64)
    phis = np.array(_PHIS)

    devs, deriv_devs = [], []
    for n in sizes:
        for omega in _OMEGAS:
            zeta = _zeta(omega)
            values, derivs = dpv_values(n, phis, zeta, derivative=True)
            exact, exact_derivs = toeplitz_values(n, phis, zeta, derivative=True)
            devs.append(float(np.max(np.abs(values - exact))))
            scale = np.maximum(np.abs(exact_derivs), 1e-4 * np.max(np.abs(exact_derivs)))
            deriv_devs.append(float(np.max(np.abs(derivs - exact_derivs) / scale)))
    report.checks.append(_check("dpv vs toeplitz", 1e-10, devs))
    report.checks.append(_check("dpv derivative vs toeplitz", 1e-8, deriv_devs))

    devs = []
    for n in (64,) if quick else (64, 512):
        for omega in _OMEGAS:
            zeta = _zeta(omega)
            forward, _ = dpv_values(n, phis, zeta)
            mirrored, _ = dpv_values(n, 2.0 * np.pi - phis, zeta)
            devs.append(float(np.max(np.abs(mirrored - (1.0 - zeta) ** n * np.conj(forward)))))
    report.checks.append(_check("reflection symmetry", 1e-12, devs))

    devs = []
    for n in (64,) if quick else (64, 512):
        edge = 1.2 * endpoint_window(n)
        for omega in _OMEGAS:
            zeta = _zeta(omega)
            for phi in (edge, 2.0 * np.pi - edge):
                series = phi_series(n, phi, zeta, tolerance=1e-6).value
                recurrence, _ = dpv_values(n, phi, zeta)
                devs.append(abs(series - recurrence[0]))
    report.checks.append(_check("series vs recurrence overlap", 1e-8, devs))
    return report


def suite_pipeline(quick: bool = False) -> SuiteReport:
    report = SuiteReport("pipeline")
    devs = []
    for n in (16, 64) if quick else (64, 256, 512):
        for omega in _OMEGAS:
            _, _, residual = i_n0_check(n, _zeta(omega), engine="dpv")
            devs.append(residual)
    report.checks.append(_check("I_N0 identity", 1e-8, devs))
    return report


_SUITES: dict[str, Callable[[bool], SuiteReport]] = {
    "oracles": suite_oracles,
    "dpv": suite_dpv,
    "pipeline": suite_pipeline,
}


def run_suite(name: str, quick: bool = False) -> list[SuiteReport]:
    """Run one suite (or ``all``) and return its reports.

    Raises:
        UsageError: For an unknown suite name.
    """
    if name not in SUITES:
        raise UsageError(f"Unknown suite '{name}'. Valid suites are: {', '.join(SUITES)}.")
    names = list(_SUITES) if name == "all" else [name]
    return [_SUITES[suite](quick) for suite in names]
