"""Real univariate polynomials.

Coefficients are stored in ascending order, ``coeffs[i]`` multiplying ``s**i``.
Every stability bound in the package is reduced to root finding or sign
analysis on these objects, so they are deliberately small and immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegreeZero, ZeroPolynomial

TRIM_RTOL = 1e-13
HURWITZ_MARGIN = 1e-9


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = np.asarray(list(coeffs), dtype=float)
    if c.size == 0:
        return (0.0,)
    scale = np.max(np.abs(c))
    if scale == 0.0 or not np.isfinite(scale):
        return (0.0,) if scale == 0.0 else tuple(float(v) for v in c)
    c = np.where(np.abs(c) < TRIM_RTOL * scale, 0.0, c)
    nz = np.flatnonzero(c)
    return tuple(float(v) for v in c[: nz[-1] + 1])


@dataclass(frozen=True, init=False)
class Polynomial:
    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float]):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "Polynomial":
        # np.poly is descending
        c = np.real_if_close(np.poly(np.asarray(roots, dtype=complex)))
        return cls(np.real(c)[::-1])

    @classmethod
    def monomial(cls, degree: int, coeff: float = 1.0) -> "Polynomial":
        return cls([0.0] * degree + [coeff])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def coeff(self, i: int) -> float:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else 0.0

    def __call__(self, s):
        return poly_eval(self, s)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return poly_add(self, _as_poly(other))

    __radd__ = __add__

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return poly_add(self, -_as_poly(other))

    def __rsub__(self, other):
        return poly_add(_as_poly(other), -self)

    def __neg__(self) -> "Polynomial":
        return Polynomial([-c for c in self.coeffs])

    def __mul__(self, other) -> "Polynomial":
        return poly_mul(self, _as_poly(other))

    __rmul__ = __mul__

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial([factor * c for c in self.coeffs])

    def shift(self, k: int = 1) -> "Polynomial":
        """Multiply by ``s**k``."""
        if self.is_zero:
            return self
        return Polynomial([0.0] * k + list(self.coeffs))

    def substitute_square(self) -> "Polynomial":
        """For an even polynomial p(w) return q with p(w) = q(w**2)."""
        return Polynomial(self.coeffs[::2])

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)})"


def _as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial([float(p)])


@dataclass(frozen=True)
class JOmegaSplit:
    """Real and imaginary parts of ``P(jw)`` as polynomials in real ``w``."""

    real_part: Polynomial
    imag_part: Polynomial

    def __call__(self, omega):
        return self.real_part(omega) + 1j * self.imag_part(omega)


def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    n = max(len(a.coeffs), len(b.coeffs))
    return Polynomial([a.coeff(i) + b.coeff(i) for i in range(n)])


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    return Polynomial(np.convolve(a.coeffs, b.coeffs))


def poly_eval(p: Polynomial, s):
    """Horner evaluation; accepts scalars or numpy arrays."""
    acc = np.zeros_like(np.asarray(s), dtype=np.result_type(s, float)) if np.ndim(s) else 0.0
    for c in reversed(p.coeffs):
        acc = acc * s + c
    return acc


def poly_roots(p: Polynomial) -> np.ndarray:
    """All complex roots, via eigenvalues of the (LAPACK-balanced) companion matrix."""
    if p.is_zero:
        raise ZeroPolynomial("the zero polynomial has no well-defined roots")
    n = p.degree
    if n == 0:
        raise DegreeZero("a nonzero constant has no roots")
    c = np.asarray(p.coeffs, dtype=float)
    monic = c[:-1] / c[-1]
    if n == 1:
        return np.array([complex(-monic[0])])
    comp = np.zeros((n, n))
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -monic
    return np.linalg.eigvals(comp).astype(complex)


def is_hurwitz(p: Polynomial, margin: float = HURWITZ_MARGIN) -> bool:
    return bool(np.all(poly_roots(p).real < -margin))


def routh_hurwitz(p: Polynomial) -> bool:
    """Strict Hurwitz test from the first column of the Routh array.

    Any vanishing first-column entry is reported as not strictly stable;
    no epsilon substitution is attempted.
    """
    if p.is_zero:
        raise ZeroPolynomial("the zero polynomial has no well-defined roots")
    if p.degree == 0:
        raise DegreeZero("a nonzero constant has no roots")
    c = list(reversed(p.coeffs))
    if c[0] < 0:
        c = [-v for v in c]
    n = len(c)
    width = (n + 1) // 2
    r0 = c[0::2] + [0.0] * (width - len(c[0::2]))
    r1 = c[1::2] + [0.0] * (width - len(c[1::2]))
    rows = [r0, r1]
    scale = max(abs(v) for v in c)
    for _ in range(n - 2):
        a, b = rows[-2], rows[-1]
        if abs(b[0]) <= 1e-14 * scale:
            return False
        new = [(b[0] * a[j + 1] - a[0] * b[j + 1]) / b[0] for j in range(width - 1)] + [0.0]
        rows.append(new)
    first = [r[0] for r in rows[:n]]
    return all(v > 1e-14 * scale for v in first)


def jomega_split(p: Polynomial) -> JOmegaSplit:
    re = [0.0] * len(p.coeffs)
    im = [0.0] * len(p.coeffs)
    sign_re = (1.0, 0.0, -1.0, 0.0)
    sign_im = (0.0, 1.0, 0.0, -1.0)
    for i, c in enumerate(p.coeffs):
        re[i] = sign_re[i % 4] * c
        im[i] = sign_im[i % 4] * c
    return JOmegaSplit(Polynomial(re), Polynomial(im))


def positive_real_roots(
    p: Polynomial,
    imag_tol: float = 1e-7,
    min_value: float = 1e-9,
) -> list[float]:
    """Roots treated as real and positive under companion-matrix noise.

    A root counts when ``|Im| < imag_tol * (1 + |Re|)`` and ``Re > min_value``.
    Returned sorted, with multiplicity.
    """
    if p.degree < 1:
        return []
    r = poly_roots(p)
    keep = (np.abs(r.imag) < imag_tol * (1.0 + np.abs(r.real))) & (r.real > min_value)
    return sorted(float(v) for v in r.real[keep])


def cluster_roots(values: Sequence[float], radius: float = 1e-6) -> list[tuple[float, int]]:
    """Group nearly equal real roots, returning (mean, multiplicity) pairs."""
    out: list[list[float]] = []
    for v in sorted(values):
        if out and abs(v - out[-1][-1]) <= radius * (1.0 + abs(v)):
            out[-1].append(v)
        else:
            out.append([v])
    return [(float(np.mean(g)), len(g)) for g in out]
