"""Exception hierarchy.

Every exception carries the process exit code the CLI uses when it escapes
to ``main()``.
"""

from __future__ import annotations

from typing import Any


class PowerSpecError(Exception):
    """Base exception for all powerspec errors."""

    exit_code = 1


# ---------------------------------------------------------------------------
# Usage
# ---------------------------------------------------------------------------


class UsageError(PowerSpecError):
    """Invalid command line or run configuration."""

    exit_code = 2


class ConfigError(UsageError):
    """A config file could not be read or holds an invalid value."""

    pass


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


class DataError(PowerSpecError):
    """Inputs are malformed or outside the domain of an operation."""

    exit_code = 3


class DomainError(DataError):
    """An argument lies outside the domain where the quantity is defined."""

    pass


class InsufficientDataError(DataError):
    """Too few realizations or sequences for a statistical estimate."""

    pass


class EndpointError(DomainError):
    """The recurrence was asked for an angle inside the endpoint margin."""

    pass


class UnsupportedError(DomainError):
    """The requested size is not supported by this route (e.g. brute force N > 3)."""

    pass


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------


class AccuracyError(PowerSpecError):
    """A numerical accuracy target was not reached.

    Attributes:
        estimate: The achieved error estimate, if one is available.
    """

    exit_code = 4

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class ConsistencyError(AccuracyError):
    """A computed quantity violates a property it must satisfy."""

    pass


class ConditioningError(AccuracyError):
    """A matrix was singular or too ill-conditioned to factorize."""

    pass


class SingularStepError(PowerSpecError):
    """A dPV recurrence step hit one of its singular denominators.

    Attributes:
        n: Recurrence index at which the guard fired.
        phi: The offending angle(s).
        zeta: The deformation parameter.
    """

    exit_code = 5

    def __init__(self, message: str, n: int, phi: Any, zeta: complex):
        super().__init__(f"{message} (N={n}, zeta={zeta!r})")
        self.n = n
        self.phi = phi
        self.zeta = zeta


class ComparisonFailed(PowerSpecError):
    """A comparison or verification suite ran to completion but did not pass."""

    exit_code = 6
