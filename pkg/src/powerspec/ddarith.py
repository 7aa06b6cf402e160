"""Vectorized double-double arithmetic and forward-mode dual numbers.

``ExtReal`` stores a value as an unevaluated sum hi + lo of two float64
arrays (about 31 significant digits); ``ExtComplex`` is a pair of them.
Operations work elementwise over numpy arrays so one recurrence step
advances every quadrature node at once.

``Dual`` carries a first derivative alongside a value of any field type
(``ExtComplex`` or a complex ndarray).
"""

from __future__ import annotations

import numbers

import mpmath
import numpy as np

_SPLITTER = 134217729.0  # 2^27 + 1

# ---------------------------------------------------------------------------
# Error-free transformations
# ---------------------------------------------------------------------------


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _quick_two_sum(a, b):
    # assumes |a| >= |b|
    s = a + b
    err = b - (s - a)
    return s, err


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    a_hi, a_lo = _split(a)
    b_hi, b_lo = _split(b)
    err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, err


def _dd_add(a_hi, a_lo, b_hi, b_lo):
    s, e = _two_sum(a_hi, b_hi)
    t, f = _two_sum(a_lo, b_lo)
    e = e + t
    s, e = _quick_two_sum(s, e)
    e = e + f
    return _quick_two_sum(s, e)


def _dd_add_d(a_hi, a_lo, b):
    s, e = _two_sum(a_hi, b)
    e = e + a_lo
    return _quick_two_sum(s, e)


def _dd_mul(a_hi, a_lo, b_hi, b_lo):
    p, e = _two_prod(a_hi, b_hi)
    e = e + (a_hi * b_lo + a_lo * b_hi)
    return _quick_two_sum(p, e)


def _dd_mul_d(a_hi, a_lo, b):
    p, e = _two_prod(a_hi, b)
    e = e + a_lo * b
    return _quick_two_sum(p, e)


def _dd_div(a_hi, a_lo, b_hi, b_lo):
    q1 = a_hi / b_hi
    p_hi, p_lo = _dd_mul_d(b_hi, b_lo, q1)
    r_hi, r_lo = _dd_add(a_hi, a_lo, -p_hi, -p_lo)
    q2 = r_hi / b_hi
    p_hi, p_lo = _dd_mul_d(b_hi, b_lo, q2)
    r_hi, r_lo = _dd_add(r_hi, r_lo, -p_hi, -p_lo)
    q3 = r_hi / b_hi
    q1, q2 = _quick_two_sum(q1, q2)
    return _dd_add_d(q1, q2, q3)


def _is_plain_real(x) -> bool:
    if isinstance(x, numbers.Real) and not isinstance(x, bool):
        return True
    return isinstance(x, np.ndarray) and not np.iscomplexobj(x)


# ---------------------------------------------------------------------------
# ExtReal
# ---------------------------------------------------------------------------


class ExtReal:
    """Elementwise double-double real array."""

    __slots__ = ("hi", "lo")
    __array_ufunc__ = None  # make ndarray <op> ExtReal defer to our reflected methods

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=float)
        self.lo = np.zeros_like(self.hi) if lo is None else np.asarray(lo, dtype=float)

    @classmethod
    def from_mpf(cls, values) -> ExtReal:
        """Round mpmath numbers (scalar or iterable) to double-double."""
        values = [values] if isinstance(values, mpmath.mpf) else list(values)
        hi = np.array([float(v) for v in values])
        lo = np.array([float(v - mpmath.mpf(h)) for v, h in zip(values, hi)])
        return cls(hi, lo)

    def to_float(self) -> np.ndarray:
        return self.hi + self.lo

    def _coerce(self, other) -> ExtReal:
        if isinstance(other, ExtReal):
            return other
        return ExtReal(other)

    def __neg__(self) -> ExtReal:
        return ExtReal(-self.hi, -self.lo)

    def __add__(self, other):
        if isinstance(other, (ExtComplex, Dual)):
            return NotImplemented
        if _is_plain_real(other):
            return ExtReal(*_dd_add_d(self.hi, self.lo, np.asarray(other, dtype=float)))
        other = self._coerce(other)
        return ExtReal(*_dd_add(self.hi, self.lo, other.hi, other.lo))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (ExtComplex, Dual)):
            return NotImplemented
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (ExtComplex, Dual)):
            return NotImplemented
        if _is_plain_real(other):
            return ExtReal(*_dd_mul_d(self.hi, self.lo, np.asarray(other, dtype=float)))
        other = self._coerce(other)
        return ExtReal(*_dd_mul(self.hi, self.lo, other.hi, other.lo))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (ExtComplex, Dual)):
            return NotImplemented
        other = self._coerce(other)
        return ExtReal(*_dd_div(self.hi, self.lo, other.hi, other.lo))

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __repr__(self) -> str:
        return f"ExtReal(hi={self.hi!r}, lo={self.lo!r})"


# ---------------------------------------------------------------------------
# ExtComplex
# ---------------------------------------------------------------------------


class ExtComplex:
    """Elementwise double-double complex array (re, im)."""

    __slots__ = ("re", "im")
    __array_ufunc__ = None

    def __init__(self, re: ExtReal, im: ExtReal | None = None):
        self.re = re
        self.im = ExtReal(np.zeros_like(re.hi)) if im is None else im

    @classmethod
    def from_complex(cls, values) -> ExtComplex:
        values = np.asarray(values, dtype=complex)
        return cls(ExtReal(values.real), ExtReal(values.imag))

    @classmethod
    def from_mpc(cls, values) -> ExtComplex:
        """Round mpmath complex numbers (scalar or iterable) to double-double."""
        if isinstance(values, (mpmath.mpc, mpmath.mpf)):
            values = [values]
        values = [mpmath.mpc(v) for v in values]
        return cls(
            ExtReal.from_mpf([v.real for v in values]),
            ExtReal.from_mpf([v.imag for v in values]),
        )

    def to_complex(self) -> np.ndarray:
        return self.re.to_float() + 1j * self.im.to_float()

    @property
    def hi(self) -> np.ndarray:
        """Leading complex part, for guards and magnitude checks."""
        return self.re.hi + 1j * self.im.hi

    def conj(self) -> ExtComplex:
        return ExtComplex(self.re, -self.im)

    def abs2(self) -> ExtReal:
        return self.re * self.re + self.im * self.im

    @staticmethod
    def _coerce(other) -> ExtComplex:
        if isinstance(other, ExtComplex):
            return other
        if isinstance(other, ExtReal):
            return ExtComplex(other)
        return ExtComplex.from_complex(other)

    def __neg__(self) -> ExtComplex:
        return ExtComplex(-self.re, -self.im)

    def __add__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        if _is_plain_real(other):
            return ExtComplex(self.re + other, self.im)
        other = self._coerce(other)
        return ExtComplex(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        return self + (-self._coerce(other) if not _is_plain_real(other) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        if _is_plain_real(other):
            return ExtComplex(self.re * other, self.im * other)
        other = self._coerce(other)
        return ExtComplex(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        if _is_plain_real(other):
            other = ExtReal(other)
            return ExtComplex(self.re / other, self.im / other)
        other = self._coerce(other)
        den = other.abs2()
        return ExtComplex(
            (self.re * other.re + self.im * other.im) / den,
            (self.im * other.re - self.re * other.im) / den,
        )

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __repr__(self) -> str:
        return f"ExtComplex({self.to_complex()!r})"


# ---------------------------------------------------------------------------
# Dual numbers
# ---------------------------------------------------------------------------


class Dual:
    """Value with its first derivative with respect to one parameter."""

    __slots__ = ("value", "deriv")
    __array_ufunc__ = None

    def __init__(self, value, deriv):
        self.value = value
        self.deriv = deriv

    def __neg__(self) -> Dual:
        return Dual(-self.value, -self.deriv)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.deriv + other.deriv)
        return Dual(self.value + other, self.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.deriv - other.deriv)
        return Dual(self.value - other, self.deriv)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.deriv)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.value * other.deriv + self.deriv * other.value,
            )
        return Dual(self.value * other, self.deriv * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.value / other.value
            return Dual(q, (self.deriv - q * other.deriv) / other.value)
        return Dual(self.value / other, self.deriv / other)

    def __rtruediv__(self, other):
        q = other / self.value
        return Dual(q, -(q * self.deriv) / self.value)

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.deriv!r})"


def value_of(x):
    """Strip the derivative part of a Dual (identity otherwise)."""
    return x.value if isinstance(x, Dual) else x


def leading(x) -> np.ndarray:
    """Leading complex128 part of a field value, Dual or not."""
    x = value_of(x)
    if isinstance(x, ExtComplex):
        return x.hi
    return np.asarray(x, dtype=complex)


def to_complex(x) -> np.ndarray:
    """Round a field value (ExtComplex or complex ndarray) to complex128."""
    if isinstance(x, ExtComplex):
        return x.to_complex()
    return np.asarray(x, dtype=complex)
