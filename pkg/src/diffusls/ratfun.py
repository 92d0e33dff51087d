"""Real-coefficient SISO rational functions of the Laplace variable ``s``.

Every per-mode symbol in this package (closed-loop maps, plant entries,
inner/outer factors, controller blocks) is a :class:`RationalTF`. Values are
immutable; all operations return new objects.

Coefficients are stored in ascending degree order, ``c[0] + c[1] s + ...``.
A :class:`RationalTF` is kept in canonical form: the denominator is monic and
common numerator/denominator roots closer than ``CANCEL_TOL`` are divided out,
so two equal functions compare equal coefficient by coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import matrix_balance, solve_continuous_lyapunov

CANCEL_TOL = 1e-9
CLUSTER_TOL = 1e-7
ILL_CONDITIONED_TOL = 1e-5
TRIM_TOL = 1e-13
AXIS_TOL = 1e-12

DEFAULT_OMEGA_GRID = np.concatenate(([0.0], np.logspace(-4.0, 6.0, 2048)))


class RatFunError(ArithmeticError):
    """Base class for rational-function errors."""


class DivisionByZeroTF(RatFunError, ZeroDivisionError):
    pass


class IllConditionedPoles(RatFunError):
    pass


class ImaginaryAxisPole(RatFunError):
    pass


class UnstableOrImproper(RatFunError):
    pass


class UnstablePole(RatFunError):
    pass


class PoleEvaluation(RatFunError):
    pass


class ImproperLimit(RatFunError):
    pass


class ImproperTF(RatFunError):
    pass


def _scale(z):
    return max(1.0, abs(z))


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

class Polynomial:
    """Real polynomial with ascending coefficients.

    Trailing (highest-degree) exact zeros are stripped, so the leading
    coefficient is nonzero unless the polynomial is identically zero, in
    which case ``coeffs`` is empty and ``degree == -1``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[float] | float):
        c = coeffs if isinstance(coeffs, np.ndarray) else np.asarray(coeffs)
        if c.ndim != 1:
            c = np.atleast_1d(c).ravel()
        if c.dtype.kind == "c":
            if np.any(c.imag != 0.0):
                raise TypeError("Polynomial coefficients must be real")
            c = c.real
        c = np.array(c, dtype=float)
        if not np.isfinite(c).all():
            raise ValueError("Polynomial coefficients must be finite")
        end = len(c)
        while end and c[end - 1] == 0.0:
            end -= 1
        c = c[:end]
        c.setflags(write=False)
        self.coeffs = c

    @classmethod
    def _wrap(cls, c: np.ndarray) -> "Polynomial":
        """Internal fast path for a fresh 1-D float array owned by the caller."""
        end = len(c)
        while end and c[end - 1] == 0.0:
            end -= 1
        if end != len(c):
            c = c[:end]
        # plain Python is cheaper than a ufunc reduction at these lengths
        if end and not all(map(math.isfinite, c.tolist())):
            raise ValueError("Polynomial coefficients must be finite")
        c.setflags(write=False)
        p = object.__new__(cls)
        p.coeffs = c
        return p

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    @property
    def lead(self) -> float:
        return float(self.coeffs[-1]) if len(self.coeffs) else 0.0

    def __call__(self, s):
        if self.is_zero:
            return np.zeros_like(np.asarray(s, dtype=complex)) if np.ndim(s) else 0.0
        return npoly.polyval(s, self.coeffs)

    def roots(self) -> np.ndarray:
        """Roots from companion-matrix eigenvalues."""
        if self.degree < 1:
            return np.empty(0, dtype=complex)
        if self.degree == 1:
            return np.array([-self.coeffs[0] / self.coeffs[1]], dtype=complex)
        if self.degree == 2:
            return _quadratic_roots(*self.coeffs)
        return np.asarray(npoly.polyroots(self.coeffs), dtype=complex)

    def trimmed(self, tol: float = TRIM_TOL) -> "Polynomial":
        """Drop leading coefficients that are floating-point noise."""
        c = self.coeffs
        if not len(c):
            return self
        vals = c.tolist()
        thresh = tol * max(map(abs, vals))
        end = len(c)
        while end > 1 and abs(vals[end - 1]) <= thresh:
            end -= 1
        return self if end == len(c) else Polynomial._wrap(c[:end].copy())

    def reflected(self) -> "Polynomial":
        """p(-s)."""
        signs = np.where(np.arange(len(self.coeffs)) % 2 == 0, 1.0, -1.0)
        return Polynomial._wrap(self.coeffs * signs)

    def __add__(self, other):
        other = _as_poly(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = a.copy()
        out[: len(b)] += b
        return Polynomial._wrap(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._wrap(-self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        if self.is_zero or other.is_zero:
            return Polynomial([])
        return Polynomial._wrap(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


def _quadratic_roots(c, b, a) -> np.ndarray:
    # cancellation-free form: q = -(b + sign(b) sqrt(disc)) / 2, roots q/a, c/q
    disc = b * b - 4.0 * a * c
    if disc >= 0.0:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:
            return np.zeros(2, dtype=complex)
        return np.array([q / a, c / q], dtype=complex)
    re = -b / (2.0 * a)
    im = math.sqrt(-disc) / (2.0 * abs(a))
    return np.array([complex(re, im), complex(re, -im)])


def _as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial(p)


# ---------------------------------------------------------------------------
# root bookkeeping
# ---------------------------------------------------------------------------

def _cluster(roots, tol: float = CLUSTER_TOL):
    """Group roots closer than ``tol`` (relative) and return (center, count).

    The mean of a numerically split multiple root is accurate to working
    precision even when the individual members are not.
    """
    remaining = [complex(r) for r in roots]
    clusters = []
    while remaining:
        members = [remaining.pop(0)]
        grew = True
        while grew:
            grew = False
            for r in list(remaining):
                if any(abs(r - m) <= tol * _scale(m) for m in members):
                    members.append(r)
                    remaining.remove(r)
                    grew = True
        center = sum(members) / len(members)
        if abs(center.imag) <= tol * _scale(center):
            center = complex(center.real, 0.0)
        clusters.append((center, len(members)))
    return clusters


def _polish(z: complex, coeffs: np.ndarray, mult: int, steps: int = 4) -> complex:
    """Multiplicity-aware Newton steps on ``coeffs``, kept only while they help."""
    der = npoly.polyder(coeffs)
    best, best_res = z, abs(npoly.polyval(z, coeffs))
    for _ in range(steps):
        if best_res == 0.0:
            break
        d = npoly.polyval(best, der)
        if d == 0:
            break
        cand = best - mult * npoly.polyval(best, coeffs) / d
        res = abs(npoly.polyval(cand, coeffs))
        if not res < best_res:
            break
        best, best_res = cand, res
    if abs(best.imag) <= CLUSTER_TOL * _scale(best):
        best = complex(best.real, 0.0)
    return best


def _common_roots(roots_a, roots_b, tol: float = CANCEL_TOL, poly_a=None):
    """Roots shared by two polynomials, repeated by common multiplicity.

    When ``poly_a`` is given each shared root is refined against it, which
    recovers the digits that the eigenvalue solver loses on higher-degree
    products.
    """
    if len(roots_a) == 0 or len(roots_b) == 0:
        return []
    ca = _cluster(roots_a)
    cb = [[c, m] for c, m in _cluster(roots_b)]
    common = []
    for c, m in ca:
        for entry in cb:
            c2, m2 = entry
            if m2 and abs(c - c2) <= tol * _scale(c):
                k = min(m, m2)
                z = c if poly_a is None else _polish(c, poly_a.coeffs, m)
                common.extend([z] * k)
                entry[1] -= k
                break
    return common


def _real_factor(roots) -> np.ndarray:
    return np.real(npoly.polyfromroots(roots)) if len(roots) else np.array([1.0])


def _divide_out(c: np.ndarray, factor: np.ndarray) -> np.ndarray:
    q, _ = npoly.polydiv(c, factor)
    return np.asarray(q, dtype=float)


def _reduce(num: Polynomial, den: Polynomial):
    num = num.trimmed()
    den = den.trimmed()
    if den.is_zero:
        raise DivisionByZeroTF("denominator is identically zero")
    if num.is_zero:
        return Polynomial._wrap(np.empty(0)), Polynomial._wrap(np.ones(1))
    lead = den.coeffs[-1]
    n = num.coeffs / lead
    d = den.coeffs / lead
    if len(n) >= 2 and len(d) >= 2:
        d_poly = Polynomial._wrap(d)
        common = _common_roots(d_poly.roots(), Polynomial._wrap(n).roots(), poly_a=d_poly)
        if common:
            factor = _real_factor(common)
            n = _divide_out(n, factor)
            d = _divide_out(d, factor)
            d = d / d[-1]
        else:
            d = d_poly.coeffs
    return Polynomial._wrap(n), Polynomial._wrap(d)


# ---------------------------------------------------------------------------
# rational functions
# ---------------------------------------------------------------------------

class RationalTF:
    """SISO rational transfer function ``num(s) / den(s)``.

    Parameters
    ----------
    num, den : Polynomial or sequence of float
        Ascending-degree coefficients.
    reduce : bool
        Cancel common roots (default). Disable only for intermediate values
        where the raw representation matters.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=1.0, reduce: bool = True):
        num = _as_poly(num)
        den = _as_poly(den)
        if den.is_zero:
            raise DivisionByZeroTF("denominator is identically zero")
        if reduce:
            num, den = _reduce(num, den)
        else:
            lead = den.coeffs[-1]
            num = Polynomial._wrap(num.coeffs / lead)
            den = Polynomial._wrap(den.coeffs / lead)
        self.num = num
        self.den = den

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "RationalTF":
        return cls([float(c)], [1.0])

    @classmethod
    def s(cls) -> "RationalTF":
        return cls([0.0, 1.0], [1.0])

    @classmethod
    def first_order(cls, gain: float, pole_rate: float) -> "RationalTF":
        """``gain / (s + pole_rate)``."""
        return cls([gain], [pole_rate, 1.0])

    # structure ---------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def relative_degree(self) -> int:
        if self.is_zero:
            return 10**9
        return self.den.degree - self.num.degree

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    @property
    def is_strictly_proper(self) -> bool:
        return self.relative_degree >= 1

    @property
    def is_constant(self) -> bool:
        return self.den.degree == 0 and self.num.degree <= 0

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots()

    def is_stable(self, margin: float = 0.0) -> bool:
        p = self.poles()
        return bool(np.all(p.real < -margin)) if len(p) else True

    # evaluation --------------------------------------------------------------
    def __call__(self, s):
        s_arr = np.asarray(s, dtype=complex)
        d = self.den(s_arr)
        scale = npoly.polyval(np.abs(s_arr), np.abs(self.den.coeffs))
        if np.any(np.abs(d) <= 1e-14 * scale):
            raise PoleEvaluation(f"evaluation at a pole of {self!r}")
        n = self.num(s_arr) if not self.is_zero else np.zeros_like(s_arr)
        out = n / d
        return complex(out) if out.ndim == 0 else out

    def limit_at_infinity(self) -> float:
        if self.is_zero or self.is_strictly_proper:
            return 0.0
        if self.relative_degree == 0:
            return self.num.lead / self.den.lead
        raise ImproperLimit(f"{self!r} is improper")

    # arithmetic --------------------------------------------------------------
    def __add__(self, other):
        other = _as_tf(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.den == other.den:
            return RationalTF(self.num + other.num, self.den)
        common = _common_roots(self.den.roots(), other.den.roots(), poly_a=self.den)
        g = _real_factor(common)
        rest_a = Polynomial._wrap(_divide_out(self.den.coeffs, g))
        rest_b = Polynomial._wrap(_divide_out(other.den.coeffs, g))
        num = self.num * rest_b + other.num * rest_a
        den = Polynomial._wrap(np.asarray(g, dtype=float).copy()) * rest_a * rest_b
        return RationalTF(num, den)

    __radd__ = __add__

    def __neg__(self):
        return RationalTF(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        other = _as_tf(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _as_tf(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, TFVector):
            return NotImplemented
        if isinstance(other, (int, float, np.floating, np.integer)):
            if other == 0:
                return RationalTF.constant(0.0)
            return RationalTF(self.num.coeffs * float(other), self.den, reduce=False)
        other = _as_tf(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero or other.is_zero:
            return RationalTF.constant(0.0)
        return RationalTF(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inv(self) -> "RationalTF":
        if self.is_zero:
            raise DivisionByZeroTF("cannot invert the zero function")
        return RationalTF(self.den, self.num)

    def __truediv__(self, other):
        other = _as_tf(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inv()

    def __rtruediv__(self, other):
        other = _as_tf(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.inv()

    def para_conjugate(self) -> "RationalTF":
        """``a(-s)`` (the para-conjugate of a real-rational SISO function)."""
        return RationalTF(self.num.reflected(), self.den.reflected(), reduce=False)

    def strictly_proper_part(self) -> "RationalTF":
        return self - self.limit_at_infinity()

    # comparison / io -----------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, RationalTF):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"RationalTF(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"

    def to_dict(self) -> dict:
        num = [float(c) for c in self.num.coeffs] or [0.0]
        return {"num": num, "den": [float(c) for c in self.den.coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "RationalTF":
        return cls(d["num"], d["den"])


def _as_tf(x):
    if isinstance(x, RationalTF):
        return x
    if isinstance(x, Polynomial):
        return RationalTF(x, [1.0])
    if isinstance(x, (int, float, np.floating, np.integer)):
        return RationalTF.constant(float(x))
    return NotImplemented


class TFVector:
    """Fixed-length column of :class:`RationalTF` entries."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence[RationalTF]):
        self.entries = tuple(_as_tf(e) for e in entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def __call__(self, s):
        return np.array([e(s) for e in self.entries])

    def __add__(self, other: "TFVector") -> "TFVector":
        return TFVector([a + b for a, b in zip(self, other)])

    def __sub__(self, other: "TFVector") -> "TFVector":
        return TFVector([a - b for a, b in zip(self, other)])

    def __mul__(self, scalar) -> "TFVector":
        return TFVector([e * scalar for e in self.entries])

    __rmul__ = __mul__

    def para_conjugate(self) -> "TFVector":
        return TFVector([e.para_conjugate() for e in self.entries])

    def dot(self, other: "TFVector") -> RationalTF:
        """Sum of entrywise products, i.e. ``self^T other``."""
        out = RationalTF.constant(0.0)
        for a, b in zip(self, other):
            out = out + a * b
        return out

    def to_list(self) -> list:
        return [e.to_dict() for e in self.entries]

    def __repr__(self):
        return f"TFVector({list(self.entries)!r})"


# ---------------------------------------------------------------------------
# partial fractions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pole:
    """One pole of a partial-fraction expansion.

    ``coeffs[k-1]`` multiplies ``1 / (s - location)**k``; ``coeffs[0]`` is the
    residue.
    """

    location: complex
    multiplicity: int
    coeffs: tuple

    @property
    def residue(self) -> complex:
        return self.coeffs[0]

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return sum(c / (s - self.location) ** (k + 1) for k, c in enumerate(self.coeffs))


@dataclass(frozen=True)
class PoleSet:
    poles: tuple

    def __iter__(self):
        return iter(self.poles)

    def __len__(self):
        return len(self.poles)

    @property
    def total_multiplicity(self) -> int:
        return sum(p.multiplicity for p in self.poles)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for p in self.poles:
            out = out + p(s)
        return out

    def select(self, predicate) -> "PoleSet":
        return PoleSet(tuple(p for p in self.poles if predicate(p.location)))

    def to_tf(self) -> RationalTF:
        """Recombine the terms into a single real rational function."""
        if not self.poles:
            return RationalTF.constant(0.0)
        factors = [npoly.polyfromroots([p.location] * p.multiplicity) for p in self.poles]
        den = np.array([1.0 + 0j])
        for f in factors:
            den = npoly.polymul(den, f)
        num = np.zeros(1, dtype=complex)
        for i, p in enumerate(self.poles):
            others = np.array([1.0 + 0j])
            for j, f in enumerate(factors):
                if j != i:
                    others = npoly.polymul(others, f)
            for k, c in enumerate(p.coeffs, start=1):
                part = npoly.polymul(others, npoly.polyfromroots([p.location] * (p.multiplicity - k)))
                num = npoly.polyadd(num, c * part)
        return RationalTF(np.real(num), np.real(den))


def _taylor_shift(c: np.ndarray, p: complex, order: int) -> np.ndarray:
    """First ``order`` Taylor coefficients of the polynomial ``c`` about ``p``."""
    out = np.zeros(order, dtype=complex)
    work = np.array(c, dtype=complex)
    for k in range(order):
        if len(work) == 0:
            break
        out[k] = npoly.polyval(p, work)
        work = npoly.polyder(work) / (k + 1) if len(work) > 1 else np.array([], dtype=complex)
    return out


def _series_divide(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    d = np.zeros(order, dtype=complex)
    for k in range(order):
        acc = a[k]
        for i in range(1, k + 1):
            acc -= b[i] * d[k - i]
        d[k] = acc / b[0]
    return d


def partial_fractions(a: RationalTF):
    """Split ``a`` into a polynomial part and a set of pole terms.

    Poles closer than ``CLUSTER_TOL`` are merged into one higher-multiplicity
    term. Distinct poles that still sit within ``ILL_CONDITIONED_TOL`` of each
    other would produce residues too large to trust, and raise
    :class:`IllConditionedPoles`.

    Returns
    -------
    polynomial_part : Polynomial
    poles : PoleSet
    """
    q, r = npoly.polydiv(a.num.coeffs if not a.is_zero else [0.0], a.den.coeffs)
    poly_part = Polynomial(q)
    rem = Polynomial(r)
    clusters = _cluster(a.den.roots())
    for i, (ci, _) in enumerate(clusters):
        for cj, _ in clusters[i + 1:]:
            if abs(ci - cj) <= ILL_CONDITIONED_TOL * _scale(ci):
                raise IllConditionedPoles(
                    f"poles {ci:.6g} and {cj:.6g} are too close to separate")
    terms = []
    for i, (p, m) in enumerate(clusters):
        if p.imag < 0:
            continue
        if rem.is_zero:
            coeffs = np.zeros(m, dtype=complex)
        else:
            other = np.array([1.0 + 0j])
            for j, (pj, mj) in enumerate(clusters):
                if j != i:
                    other = npoly.polymul(other, npoly.polyfromroots([pj] * mj))
            num_t = _taylor_shift(rem.coeffs, p, m)
            den_t = _taylor_shift(other, p, m)
            series = _series_divide(num_t, den_t, m)
            coeffs = series[::-1]
        if p.imag == 0.0:
            coeffs = coeffs.real.astype(complex)
            terms.append(Pole(complex(p.real, 0.0), m, tuple(complex(c) for c in coeffs)))
        else:
            terms.append(Pole(p, m, tuple(complex(c) for c in coeffs)))
            terms.append(Pole(p.conjugate(), m, tuple(complex(c).conjugate() for c in coeffs)))
    terms.sort(key=lambda t: (t.location.real, t.location.imag))
    return poly_part, PoleSet(tuple(terms))


def stable_projection(a: RationalTF) -> RationalTF:
    """Part of a strictly proper ``a`` carried by open left-half-plane poles.

    This is the orthogonal projection onto RH2; ``a - stable_projection(a)``
    has only right-half-plane poles.
    """
    if a.is_zero:
        return a
    if not a.is_strictly_proper:
        raise ImproperTF("stable projection needs a strictly proper function")
    _, poles = partial_fractions(a)
    for p in poles:
        if abs(p.location.real) <= AXIS_TOL * _scale(p.location):
            raise ImaginaryAxisPole(f"pole {p.location:.6g} on the imaginary axis")
    return poles.select(lambda z: z.real < 0).to_tf()


def antistable_part(a: RationalTF) -> RationalTF:
    """Complement of :func:`stable_projection`: the right-half-plane terms.

    Built from the same expansion, so ``stable_projection(a) +
    antistable_part(a)`` equals ``a`` without relying on pole/zero
    cancellation in a subtraction.
    """
    if a.is_zero:
        return a
    if not a.is_strictly_proper:
        raise ImproperTF("stable projection needs a strictly proper function")
    _, poles = partial_fractions(a)
    return poles.select(lambda z: z.real > 0).to_tf()


# ---------------------------------------------------------------------------
# norms and module-level operations
# ---------------------------------------------------------------------------

def companion_realization(a: RationalTF):
    """Controllable canonical ``(A, B, C, D)`` of a proper ``a``."""
    if not a.is_proper:
        raise ImproperTF(f"{a!r} is improper")
    den = a.den.coeffs
    n = len(den) - 1
    d = a.limit_at_infinity()
    num = np.zeros(n + 1)
    if not a.is_zero:
        num[: len(a.num.coeffs)] = a.num.coeffs
    A = np.zeros((n, n))
    if n:
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -den[:n]
    B = np.zeros((n, 1))
    if n:
        B[-1, 0] = 1.0
    C = (num[:n] - d * den[:n]).reshape(1, n)
    return A, B, C, np.array([[d]])


def h2_norm(a) -> float:
    """H2 norm ``sqrt((1/2pi) int |a(jw)|^2 dw)``.

    Computed as ``sqrt(C P C^T)`` with ``A P + P A^T + B B^T = 0`` on a
    balanced companion realization. This equals the sum of the
    left-half-plane residues of ``a(s) a(-s)`` but, unlike an explicit
    residue sum, is insensitive to repeated poles. A :class:`TFVector`
    gives the root-sum-square over its entries.
    """
    if isinstance(a, TFVector):
        return math.sqrt(sum(h2_norm(e) ** 2 for e in a))
    if a.is_zero:
        return 0.0
    if not a.is_strictly_proper or not a.is_stable():
        raise UnstableOrImproper(f"{a!r} is not in RH2")
    A, B, C, _ = companion_realization(a)
    if A.shape[0] > 1:
        A, T = matrix_balance(A, permute=False)
        B = B / np.diag(T)[:, None]
        C = C * np.diag(T)[None, :]
    P = solve_continuous_lyapunov(A, -B @ B.T)
    return math.sqrt(max(float((C @ P @ C.T)[0, 0]), 0.0))


def h2_norm_residues(a: RationalTF) -> float:
    """Same norm as :func:`h2_norm` by summing LHP residues of ``a(s) a(-s)``.

    Kept as an independent route for cross-checks; needs well-separated
    poles.
    """
    if a.is_zero:
        return 0.0
    if not a.is_strictly_proper or not a.is_stable():
        raise UnstableOrImproper(f"{a!r} is not in RH2")
    _, poles = partial_fractions(a * a.para_conjugate())
    total = sum(p.residue for p in poles if p.location.real < 0)
    return math.sqrt(max(float(np.real(total)), 0.0))


def hinf_norm_on_axis(a: RationalTF, omega_grid=None) -> float:
    """Largest ``|a(jw)|`` over a frequency grid and ``w -> infinity``.

    The default grid is ``w = 0`` plus 2048 log-spaced points in
    ``[1e-4, 1e6]``. The result is a lower bound on the true H-infinity norm
    that tightens as the grid gets denser.
    """
    if a.is_zero:
        return 0.0
    if not a.is_proper:
        raise ImproperTF(f"{a!r} is improper")
    p = a.poles()
    if len(p) and np.any(p.real >= 0):
        raise UnstablePole(f"{a!r} has a pole in the closed right half-plane")
    w = DEFAULT_OMEGA_GRID if omega_grid is None else np.asarray(omega_grid, dtype=float)
    vals = np.abs(a(1j * w))
    return float(max(np.max(vals), abs(a.limit_at_infinity())))


def add(a: RationalTF, b: RationalTF) -> RationalTF:
    return _as_tf(a) + _as_tf(b)


def mul(a: RationalTF, b: RationalTF) -> RationalTF:
    return _as_tf(a) * _as_tf(b)


def inv(a: RationalTF) -> RationalTF:
    return _as_tf(a).inv()


def para_conjugate(a):
    return a.para_conjugate()


def evaluate(a: RationalTF, s):
    return a(s)


def limit_at_infinity(a: RationalTF) -> float:
    return a.limit_at_infinity()


def coeff_distance(a: RationalTF, b: RationalTF) -> float:
    """Largest coefficient gap between two canonical forms.

    Each gap is scaled by ``max(1, |c|)``. Functions whose reduced forms have
    different degrees are infinitely far apart.
    """
    if a.is_zero and b.is_zero:
        return 0.0
    if len(a.num.coeffs) != len(b.num.coeffs) or len(a.den.coeffs) != len(b.den.coeffs):
        if a.is_zero or b.is_zero:
            other = b if a.is_zero else a
            if other.num.degree == 0:
                return float(abs(other.num.coeffs[0]) / _scale(other.den.coeffs[0]))
        return math.inf
    gaps = [0.0]
    for x, y in ((a.num.coeffs, b.num.coeffs), (a.den.coeffs, b.den.coeffs)):
        gaps.append(float(np.max(np.abs(x - y) / np.maximum(1.0, np.maximum(np.abs(x), np.abs(y))))))
    return max(gaps)
