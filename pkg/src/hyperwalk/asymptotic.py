"""Truncated asymptotic series in a formal infinitesimal ``eps``.

An :class:`AsymptoticNumber` stands for

    c_0 eps**k0 + c_1 eps**(k0+1) + ... + c_K eps**(k0+K)

with complex coefficients.  ``k0`` may be negative (infinite numbers), zero
(appreciable numbers) or positive (infinitesimals).  Every number carries its
truncation order ``K``; arithmetic never mixes truncation orders.

The module also provides the two closeness relations used throughout the
package:

* ``infinitely_close(z, w)``: ``z - w`` is infinitesimal (additively invariant);
* ``adequal(z, w)``: ``z / w - 1`` is infinitesimal, or ``z == w == 0``
  (multiplicatively invariant).

A relation can only be decided from coefficients that were actually computed.
:func:`relation_diagnostic` reports which coefficient decided the answer and
flags the case where every computed coefficient of the discriminating quantity
vanished.
"""

from __future__ import annotations

import cmath
import math
import numbers
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "DEFAULT_TRUNCATION",
    "FLUSH_RELATIVE",
    "AsymptoticNumber",
    "DomainError",
    "RelationDiagnostic",
    "adequal",
    "arith",
    "compose_analytic",
    "constant",
    "cos",
    "epsilon",
    "exp",
    "infinitely_close",
    "random_finite",
    "relation_diagnostic",
    "sin",
    "standard_part",
]

DEFAULT_TRUNCATION = 8
FLUSH_RELATIVE = 1e-14


class DomainError(ValueError):
    """Operation undefined for an infinite (negative leading order) number."""


def _flush_and_pack(order: int, dense: np.ndarray, K: int, scale: float | None = None) -> "AsymptoticNumber":
    # ``scale`` is the magnitude of the operands; cancellation residue below
    # FLUSH_RELATIVE * scale is rounding noise, not a genuine coefficient.
    dense = np.asarray(dense, dtype=complex)
    mags = np.abs(dense)
    if scale is None:
        scale = float(mags.max()) if mags.size else 0.0
    if scale == 0.0 or not mags.size:
        return AsymptoticNumber(0, (), K)
    dense = np.where(mags < FLUSH_RELATIVE * scale, 0.0, dense)
    nz = np.flatnonzero(dense)
    if nz.size == 0:
        return AsymptoticNumber(0, (), K)
    first = int(nz[0])
    body = dense[first:first + K + 1]
    padded = np.zeros(K + 1, dtype=complex)
    padded[: body.size] = body
    return AsymptoticNumber(order + first, tuple(complex(c) for c in padded), K)


@dataclass(frozen=True)
class AsymptoticNumber:
    leading_order: int
    coeffs: tuple[complex, ...]
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self) -> None:
        if self.truncation < 0:
            raise ValueError("truncation order must be non-negative")
        if self.coeffs:
            if len(self.coeffs) != self.truncation + 1:
                raise ValueError(
                    f"expected {self.truncation + 1} coefficients, got {len(self.coeffs)}"
                )
            if self.coeffs[0] == 0:
                raise ValueError("leading coefficient must be nonzero (use from_coeffs to normalize)")
        elif self.leading_order != 0:
            raise ValueError("canonical zero has leading_order 0")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_coeffs(
        cls, coeffs: Iterable[complex], leading_order: int = 0, truncation: int = DEFAULT_TRUNCATION
    ) -> AsymptoticNumber:
        """Normalize an arbitrary coefficient list starting at ``leading_order``."""
        return _flush_and_pack(leading_order, np.array(list(coeffs), dtype=complex), truncation)

    @classmethod
    def zero(cls, truncation: int = DEFAULT_TRUNCATION) -> AsymptoticNumber:
        return cls(0, (), truncation)

    # -- inspection -------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_finite(self) -> bool:
        return self.is_zero or self.leading_order >= 0

    @property
    def is_infinitesimal(self) -> bool:
        return self.is_zero or self.leading_order >= 1

    @property
    def known_through(self) -> int:
        """Highest absolute order carried by the coefficient list."""
        return self.leading_order + self.truncation

    def coefficient(self, order: int) -> complex:
        """Coefficient of ``eps**order`` (0 outside the stored window)."""
        j = order - self.leading_order
        if self.is_zero or j < 0 or j > self.truncation:
            return 0j
        return self.coeffs[j]

    def dense(self, upto: int) -> np.ndarray:
        """Coefficients of absolute orders ``0..upto`` (finite numbers only)."""
        if not self.is_finite:
            raise DomainError("infinite number has no dense expansion from order 0")
        out = np.zeros(upto + 1, dtype=complex)
        if self.is_zero:
            return out
        stop = min(upto + 1, self.leading_order + self.truncation + 1)
        for k in range(self.leading_order, stop):
            out[k] = self.coeffs[k - self.leading_order]
        return out

    def _scale(self) -> float:
        return max((abs(c) for c in self.coeffs), default=0.0)

    def _coerce(self, other: object) -> AsymptoticNumber:
        if isinstance(other, AsymptoticNumber):
            if other.truncation != self.truncation:
                raise ValueError(
                    f"truncation mismatch: {self.truncation} vs {other.truncation}"
                )
            return other
        if isinstance(other, numbers.Complex):
            return constant(complex(other), self.truncation)
        return NotImplemented  # type: ignore[return-value]

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: object) -> AsymptoticNumber:
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        if self.is_zero:
            return b
        if b.is_zero:
            return self
        K = self.truncation
        lo = min(self.leading_order, b.leading_order)
        dense = np.zeros(K + 1, dtype=complex)
        for num in (self, b):
            off = num.leading_order - lo
            if off <= K:
                dense[off:] += np.array(num.coeffs[: K + 1 - off])
        return _flush_and_pack(lo, dense, K, max(self._scale(), b._scale()))

    __radd__ = __add__

    def __neg__(self) -> AsymptoticNumber:
        if self.is_zero:
            return self
        return AsymptoticNumber(self.leading_order, tuple(-c for c in self.coeffs), self.truncation)

    def __pos__(self) -> AsymptoticNumber:
        return self

    def __sub__(self, other: object) -> AsymptoticNumber:
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return self + (-b)

    def __rsub__(self, other: object) -> AsymptoticNumber:
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return b + (-self)

    def __mul__(self, other: object) -> AsymptoticNumber:
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        K = self.truncation
        if self.is_zero or b.is_zero:
            return AsymptoticNumber.zero(K)
        prod = np.convolve(np.array(self.coeffs), np.array(b.coeffs))[: K + 1]
        return _flush_and_pack(self.leading_order + b.leading_order, prod, K, self._scale() * b._scale())

    __rmul__ = __mul__

    def reciprocal(self) -> AsymptoticNumber:
        if self.is_zero:
            raise ZeroDivisionError("division by the zero asymptotic number")
        b = self.coeffs
        K = self.truncation
        r = [0j] * (K + 1)
        r[0] = 1 / b[0]
        for n in range(1, K + 1):
            acc = sum(b[j] * r[n - j] for j in range(1, n + 1))
            r[n] = -acc / b[0]
        return _flush_and_pack(-self.leading_order, np.array(r), K)

    def __truediv__(self, other: object) -> AsymptoticNumber:
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return self * b.reciprocal()

    def __rtruediv__(self, other: object) -> AsymptoticNumber:
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return b * self.reciprocal()

    def __pow__(self, n: int) -> AsymptoticNumber:
        if not isinstance(n, numbers.Integral):
            return NotImplemented
        if n < 0:
            return self.reciprocal() ** (-n)
        out = constant(1.0, self.truncation)
        for _ in range(int(n)):
            out = out * self
        return out

    # -- display ----------------------------------------------------------

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        terms = []
        for j, c in enumerate(self.coeffs):
            if c == 0:
                continue
            k = self.leading_order + j
            cs = _fmt_coeff(c)
            if k == 0:
                terms.append(cs)
            elif k == 1:
                terms.append(f"{cs}*eps")
            else:
                terms.append(f"{cs}*eps^{k}")
        terms.append(f"O(eps^{self.known_through + 1})")
        return " + ".join(terms).replace("+ -", "- ")


def _fmt_coeff(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}j"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}j)"


def constant(value: complex, truncation: int = DEFAULT_TRUNCATION) -> AsymptoticNumber:
    """The appreciable (or zero) number ``value``."""
    value = complex(value)
    if value == 0:
        return AsymptoticNumber.zero(truncation)
    return AsymptoticNumber(0, (value,) + (0j,) * truncation, truncation)


def epsilon(truncation: int = DEFAULT_TRUNCATION, power: int = 1) -> AsymptoticNumber:
    """The base infinitesimal raised to ``power``."""
    return AsymptoticNumber(power, (1 + 0j,) + (0j,) * truncation, truncation)


_ARITH: dict[str, Callable[[AsymptoticNumber, AsymptoticNumber], AsymptoticNumber]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def arith(op: str, a: AsymptoticNumber, b: AsymptoticNumber) -> AsymptoticNumber:
    try:
        fn = _ARITH[op]
    except KeyError:
        raise ValueError(f"unknown operation {op!r}; expected one of {sorted(_ARITH)}") from None
    return fn(a, b)


def _powers(h: np.ndarray, count: int) -> list[np.ndarray]:
    P = h.size
    out = [np.zeros(P, dtype=complex)]
    out[0][0] = 1
    for _ in range(1, count):
        out.append(np.convolve(out[-1], h)[:P])
    return out


def compose_analytic(f: str, s: AsymptoticNumber) -> AsymptoticNumber:
    """Evaluate ``sin``, ``cos`` or ``exp`` of a finite number.

    ``s`` is split as ``c + h`` with ``c`` its order-0 coefficient; the result
    combines ``f(c)`` (and ``f'(c)``) with Taylor series of ``sin h``/``cos h``
    or ``exp h``, exact through the highest order carried by ``s``.
    """
    if f not in ("sin", "cos", "exp"):
        raise ValueError(f"unsupported function {f!r}")
    if not s.is_finite:
        raise DomainError(f"{f} of an infinite number (leading order {s.leading_order})")
    K = s.truncation
    if s.is_zero:
        return constant({"sin": 0.0, "cos": 1.0, "exp": 1.0}[f], K)

    P = s.known_through
    d = s.dense(P)
    c = d[0]
    h = d.copy()
    h[0] = 0
    # h**n vanishes below order n, so powers up to P suffice.
    pw = _powers(h, P + 1)
    if f == "exp":
        series = sum(pw[n] / math.factorial(n) for n in range(P + 1))
        dense = cmath.exp(c) * series
    else:
        sin_h = sum((-1) ** (n // 2) * pw[n] / math.factorial(n) for n in range(1, P + 1, 2))
        cos_h = sum((-1) ** (n // 2) * pw[n] / math.factorial(n) for n in range(0, P + 1, 2))
        sc, cc = cmath.sin(c), cmath.cos(c)
        dense = sc * cos_h + cc * sin_h if f == "sin" else cc * cos_h - sc * sin_h
    return _flush_and_pack(0, dense, K)


def sin(s: AsymptoticNumber) -> AsymptoticNumber:
    return compose_analytic("sin", s)


def cos(s: AsymptoticNumber) -> AsymptoticNumber:
    return compose_analytic("cos", s)


def exp(s: AsymptoticNumber) -> AsymptoticNumber:
    return compose_analytic("exp", s)


def standard_part(s: AsymptoticNumber) -> complex:
    """Nearest standard value of a finite number (its order-0 coefficient)."""
    if not s.is_finite:
        raise DomainError("infinite number has no shadow")
    return s.coefficient(0)


@dataclass(frozen=True)
class RelationDiagnostic:
    """How a closeness relation was decided.

    ``deciding_order`` is the absolute order of the first nonzero coefficient
    of the discriminating quantity (``z - w`` for ``approx``, ``z/w - 1`` for
    ``adequal``).  It is ``None`` when the answer did not need one (joint
    zero, one-sided zero, infinite ratio) or when every computed coefficient
    vanished; the latter sets ``undecidable_at_truncation``.
    """

    relation: str
    holds: bool
    deciding_order: int | None
    undecidable_at_truncation: bool = False
    note: str = ""


def _as_number(x: AsymptoticNumber | complex, like: AsymptoticNumber | None) -> AsymptoticNumber:
    if isinstance(x, AsymptoticNumber):
        return x
    return constant(complex(x), like.truncation if like is not None else DEFAULT_TRUNCATION)


def relation_diagnostic(
    z: AsymptoticNumber | complex, w: AsymptoticNumber | complex, relation: str = "adequal"
) -> RelationDiagnostic:
    z = _as_number(z, w if isinstance(w, AsymptoticNumber) else None)
    w = _as_number(w, z)
    if relation == "approx":
        if not (z.is_finite and w.is_finite):
            raise DomainError("infinitely_close needs finite operands")
        d = z - w
        if d.is_zero:
            return RelationDiagnostic(
                "approx", True, None, True,
                f"z - w vanishes through order {min(z.known_through, w.known_through)}; "
                "treated as infinitesimal",
            )
        return RelationDiagnostic("approx", d.leading_order >= 1, d.leading_order)
    if relation == "adequal":
        if z.is_zero and w.is_zero:
            return RelationDiagnostic("adequal", True, None, note="z = w = 0")
        if z.is_zero or w.is_zero:
            return RelationDiagnostic("adequal", False, None, note="exactly one operand is zero")
        r = z / w
        if r.leading_order != 0:
            return RelationDiagnostic("adequal", False, None, note=f"ratio has leading order {r.leading_order}")
        d = r - 1
        if d.is_zero:
            return RelationDiagnostic(
                "adequal", True, None, True,
                f"z/w - 1 vanishes through order {r.known_through}; treated as infinitesimal",
            )
        return RelationDiagnostic("adequal", d.leading_order >= 1, d.leading_order)
    raise ValueError(f"unknown relation {relation!r}")


def infinitely_close(z: AsymptoticNumber | complex, w: AsymptoticNumber | complex) -> bool:
    return relation_diagnostic(z, w, "approx").holds


def adequal(z: AsymptoticNumber | complex, w: AsymptoticNumber | complex) -> bool:
    return relation_diagnostic(z, w, "adequal").holds


def random_finite(rng: np.random.Generator, truncation: int = DEFAULT_TRUNCATION,
                  max_leading: int = 2, scale: float = 1.0) -> AsymptoticNumber:
    """Random finite number with complex coefficients, for property checks."""
    k0 = int(rng.integers(0, max_leading + 1))
    re = rng.uniform(-scale, scale, truncation + 1)
    im = rng.uniform(-scale, scale, truncation + 1)
    coeffs: Sequence[complex] = re + 1j * im
    return AsymptoticNumber.from_coeffs(coeffs, k0, truncation)
