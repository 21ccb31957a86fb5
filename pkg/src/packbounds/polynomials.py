"""Univariate polynomials, orthogonal families and the radial Fourier inverse.

Coefficients are stored lowest degree first. A :class:`Poly` keeps one
coefficient domain (Fraction, ScaledRational, PiSum, mpf, float or
RationalInterval); arithmetic between different domains is refused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .numerics import (
    PiSum,
    RationalInterval,
    ScaledRational,
    angle_enclosure,
    as_fraction,
    cos_enclosure,
    gamma_half,
    pi_power_enclosure,
    sin_enclosure,
    to_mpf,
)

__all__ = [
    "Poly",
    "BasisSpec",
    "jacobi",
    "laguerre",
    "fourier_inverse_radial",
    "fourier_inverse_radial_x",
    "make_basis_B",
    "jacobi_basis",
    "change_basis",
    "cap_weight",
    "cap_weight_enclosure",
    "sturm_sequence",
    "sturm_count",
]

BASIS_X = "x"  # monomials x^k
BASIS_X2 = "x2"  # monomials x^(2k): coefficient k multiplies x^(2k)


def _domain(c):
    if isinstance(c, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(c, int):
        return Fraction
    return type(c)


def _norm(c):
    return Fraction(c) if isinstance(c, int) else c


def _is_zero(c) -> bool:
    if isinstance(c, RationalInterval):
        return c.lo == 0 and c.hi == 0
    if isinstance(c, PiSum):
        return c.is_zero()
    return c == 0


class Poly:
    """Univariate polynomial with a basis tag.

    ``basis`` is ``"x"`` (monomials), ``"x2"`` (coefficient k multiplies
    x^(2k)) or the name of a :class:`BasisSpec`.
    """

    __slots__ = ("coeffs", "basis")

    def __init__(self, coeffs: Sequence = (), basis: str = BASIS_X):
        cs = [_norm(c) for c in coeffs]
        doms = {_domain(c) for c in cs}
        if len(doms) > 1:
            # Fraction zeros may pad a ScaledRational or PiSum polynomial
            if doms - {Fraction} and all(c == 0 for c in cs if _domain(c) is Fraction):
                (dom,) = doms - {Fraction}
                z = next(c for c in cs if _domain(c) is dom) * 0
                cs = [z if _domain(c) is Fraction else c for c in cs]
            else:
                raise TypeError(f"mixed coefficient domains {sorted(d.__name__ for d in doms)}")
        while cs and _is_zero(cs[-1]):
            cs.pop()
        self.coeffs = tuple(cs)
        self.basis = basis

    # -- basics -----------------------------------------------------------
    @property
    def degree(self) -> int:
        """Degree in the basis index (-1 for the zero polynomial)."""
        return len(self.coeffs) - 1

    @property
    def domain(self):
        return _domain(self.coeffs[0]) if self.coeffs else Fraction

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else Fraction(0)

    def __repr__(self):
        return f"Poly({list(self.coeffs)!r}, basis={self.basis!r})"

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        if self.basis != other.basis or len(self.coeffs) != len(other.coeffs):
            return False
        return all(a == b for a, b in zip(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.coeffs, self.basis))

    def _check(self, other: "Poly"):
        if self.basis != other.basis:
            raise TypeError(f"basis mismatch {self.basis} vs {other.basis}")
        if self.coeffs and other.coeffs and self.domain is not other.domain:
            raise TypeError(f"domain mismatch {self.domain.__name__} vs {other.domain.__name__}")

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly([other], self.basis)
        self._check(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a, b = self.coeffs, other.coeffs
        out = []
        for k in range(n):
            if k < len(a) and k < len(b):
                out.append(a[k] + b[k])
            else:
                out.append(a[k] if k < len(a) else b[k])
        return Poly(out, self.basis)

    __radd__ = __add__

    def __neg__(self):
        return Poly([-c for c in self.coeffs], self.basis)

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly([other], self.basis)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "Poly":
        return Poly([c * a for a in self.coeffs], self.basis)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        if self.basis not in (BASIS_X, BASIS_X2):
            raise TypeError("products need a monomial basis")
        if not self.coeffs or not other.coeffs:
            return Poly([], self.basis)
        a, b = self.coeffs, other.coeffs
        out = [None] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                t = x * y
                out[i + j] = t if out[i + j] is None else out[i + j] + t
        return Poly(out, self.basis)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, e: int):
        out = Poly([self.coeffs[0] * 0 + 1 if self.coeffs else Fraction(1)], self.basis)
        for _ in range(e):
            out = out * self
        return out

    def __call__(self, x):
        """Horner evaluation; ``x2`` polynomials are evaluated at x**2."""
        if self.basis not in (BASIS_X, BASIS_X2):
            raise TypeError("evaluate after converting to a monomial basis")
        if self.basis == BASIS_X2:
            x = x * x
        acc = None
        for c in reversed(self.coeffs):
            acc = c if acc is None else acc * x + c
        if acc is None:
            return x * 0
        return acc

    def derivative(self) -> "Poly":
        if self.basis != BASIS_X:
            raise TypeError("derivative needs the x basis")
        return Poly([k * c for k, c in enumerate(self.coeffs)][1:], self.basis)

    def compose_scale(self, s) -> "Poly":
        """p(s*x) for a scalar s."""
        out, pw = [], None
        for c in self.coeffs:
            pw = Fraction(1) if pw is None else pw * s
            out.append(c * pw)
        return Poly(out, self.basis)

    def shift_degree(self, m: int) -> "Poly":
        """Multiply by x**m (index shift)."""
        if not self.coeffs:
            return self
        z = self.coeffs[0] * 0
        return Poly([z] * m + list(self.coeffs), self.basis)

    def map(self, fn) -> "Poly":
        return Poly([fn(c) for c in self.coeffs], self.basis)

    def to_mpf(self) -> "Poly":
        return self.map(to_mpf)

    def even_to_x2(self) -> "Poly":
        """Re-tag an even x-polynomial as an x2 polynomial."""
        if self.basis == BASIS_X2:
            return self
        if any(not _is_zero(c) for c in self.coeffs[1::2]):
            raise ValueError("polynomial has odd-degree terms")
        return Poly(self.coeffs[0::2], BASIS_X2)

    def x2_to_x(self) -> "Poly":
        if self.basis == BASIS_X:
            return self
        z = self.coeffs[0] * 0 if self.coeffs else Fraction(0)
        out = []
        for c in self.coeffs:
            out.extend([c, z])
        return Poly(out[:-1] if out else [], BASIS_X)


def poly_x(coeffs) -> Poly:
    return Poly(coeffs, BASIS_X)


# ---------------------------------------------------------------------------
# Orthogonal families
# ---------------------------------------------------------------------------

_X = Poly([Fraction(0), Fraction(1)])
_ONE = Poly([Fraction(1)])


def jacobi(n: int, k: int) -> Poly:
    """Symmetric Jacobi polynomial for S^(n-1), normalized to value 1 at u=1.

    This is P_k^((n-3)/2,(n-3)/2) rescaled, computed from the normalized
    three-term recurrence R_k = ((2k+n-4) u R_(k-1) - (k-1) R_(k-2)) / (k+n-3).
    """
    return _jacobi_family(n, k)[k]


_jacobi_cache: dict = {}


def _jacobi_family(n: int, k: int) -> list[Poly]:
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if k < 0:
        raise ValueError("degree must be >= 0")
    fam = _jacobi_cache.setdefault(n, [_ONE, _X])
    while len(fam) <= k:
        m = len(fam)
        nxt = (_X * fam[m - 1]).scale(Fraction(2 * m + n - 4, m + n - 3)) - fam[m - 2].scale(
            Fraction(m - 1, m + n - 3)
        )
        fam.append(nxt)
    return fam


def laguerre(alpha, k: int) -> Poly:
    """Generalized Laguerre polynomial L_k^alpha with exact coefficients."""
    alpha = as_fraction(alpha)
    if k < 0:
        raise ValueError("degree must be >= 0")
    prev, cur = _ONE, Poly([1 + alpha, Fraction(-1)])
    if k == 0:
        return prev
    for m in range(2, k + 1):
        # m L_m = (2m - 1 + alpha - x) L_(m-1) - (m - 1 + alpha) L_(m-2)
        nxt = (Poly([2 * m - 1 + alpha, Fraction(-1)]) * cur - prev.scale(m - 1 + alpha)).scale(
            Fraction(1, m)
        )
        prev, cur = cur, nxt
    return cur


# ---------------------------------------------------------------------------
# pi-aware scalar helpers
# ---------------------------------------------------------------------------


def _times_pi_power(c, q: Fraction, e: int, bits: int = 512):
    """c * q * pi**e in a domain compatible with c."""
    if isinstance(c, (int, Fraction, ScaledRational, PiSum)):
        return PiSum.lift(c) * PiSum({e: q})
    if isinstance(c, RationalInterval):
        return c * (pi_power_enclosure(e, bits) * q)
    if isinstance(c, float):
        return c * float(q) * math.pi**e
    return c * to_mpf(q) * mpmath.pi**e


def fourier_inverse_radial(n: int, p: Poly) -> Poly:
    """Radial inverse Fourier transform against the Gaussian.

    ``p`` holds the coefficients a_k of t^(2k) (basis ``x2``, or an even ``x``
    polynomial). Returns q in basis ``x2`` (coefficients of w^(2j)) with

        q(w) = sum_k a_k k! pi^(-k) L_k^(n/2-1)(pi w^2),

    so that the inverse transform of p(|u|) exp(-pi |u|^2) on R^n equals
    q(|x|) exp(-pi |x|^2).
    """
    if p.basis == BASIS_X:
        if any(not _is_zero(c) for c in p.coeffs[1::2]):
            raise ValueError("fourier_inverse_radial needs an even polynomial")
        p = p.even_to_x2()
    elif p.basis != BASIS_X2:
        raise TypeError("expected a monomial polynomial")
    alpha = Fraction(n - 2, 2)
    out: list = [None] * len(p.coeffs)
    for k, a in enumerate(p.coeffs):
        if _is_zero(a):
            continue
        lk = laguerre(alpha, k)
        for j, l in enumerate(lk.coeffs):
            t = _times_pi_power(a, math.factorial(k) * l, j - k)
            out[j] = t if out[j] is None else out[j] + t
    z = _times_pi_power(p.coeffs[0], Fraction(0), 0) if p.coeffs else Fraction(0)
    return Poly([z if c is None else c for c in out], BASIS_X2)


def fourier_inverse_radial_x(n: int, p: Poly, scale: int = 2) -> Poly:
    """Radial inverse Fourier transform in the scaled variable x = scale*pi*s.

    ``p`` is a rational polynomial in x_t = scale*pi*t^2; the result is a
    rational polynomial in x_w = scale*pi*w^2. No pi appears because
    F^-1[x_t^k] = scale^k k! L_k(x_w / scale).
    """
    alpha = Fraction(n - 2, 2)
    out = Poly([])
    for k, a in enumerate(p.coeffs):
        if a == 0:
            continue
        lk = laguerre(alpha, k).compose_scale(Fraction(1, scale))
        out = out + lk.scale(a * scale**k * math.factorial(k))
    return out


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasisSpec:
    """Triangular polynomial basis.

    Elements are stored as rational polynomials ``elements_x[k]`` in the
    scaled variable x = var_scale * t, where var_scale is a ScaledRational
    (``2*pi`` for the Laguerre basis, 1 for the Jacobi basis). ``mu`` holds
    the normalization constants.
    """

    family: str
    n: int
    d: int
    var_scale: ScaledRational
    mu: tuple
    elements_x: tuple = field(repr=False)

    @property
    def name(self) -> str:
        return f"{self.family}[n={self.n},d={self.d}]"

    def element(self, k: int) -> Poly:
        """b_k as a polynomial in t (ScaledRational coefficients)."""
        ex = self.elements_x[k]
        return Poly([ScaledRational(c, 0) * self.var_scale**j for j, c in enumerate(ex.coeffs)])

    def to_basis_x(self, p_x: Poly) -> list:
        """Coordinates of a polynomial given in the scaled variable x."""
        if p_x.degree > self.d:
            raise ValueError(f"degree {p_x.degree} exceeds basis degree {self.d}")
        rem = list(p_x.coeffs) + [Fraction(0)] * (self.d + 1 - len(p_x.coeffs))
        c = [None] * (self.d + 1)
        for k in range(self.d, -1, -1):
            ek = self.elements_x[k].coeffs
            ck = rem[k] / ek[k]
            c[k] = ck
            if not _is_zero(ck):
                for j in range(k):
                    rem[j] = rem[j] - ck * ek[j]
        return c

    def from_basis_x(self, c: Sequence) -> Poly:
        out = None
        for k, ck in enumerate(c):
            if _is_zero(ck):
                continue
            term = self.elements_x[k].map(lambda e, ck=ck: ck * e)
            out = term if out is None else out + term
        return out if out is not None else Poly([])

    def transition_matrix(self) -> list[list[Fraction]]:
        """Upper-triangular T with T[j][k] = coefficient of x^j in b_k."""
        return [[self.elements_x[k].coeff(j) for k in range(self.d + 1)] for j in range(self.d + 1)]


def _mu_from_coeffs(coeffs, var_scale: ScaledRational) -> Fraction:
    # max |coef| of the t-polynomial with pi fixed at 256 bits; not certified
    with mpmath.workprec(256):
        vals = [abs(to_mpf(c) * var_scale.to_mpf() ** j) for j, c in enumerate(coeffs)]
        return as_fraction(max(vals))


def make_basis_B(n: int, d: int, mu: Sequence | None = None) -> BasisSpec:
    """Basis b_k(t) = mu_k^-1 L_k^(n/2-1)(2 pi t), k = 0..d.

    mu_k is the largest absolute coefficient of L_k^(n/2-1)(2 pi t) evaluated
    with a 256-bit pi, so every element has maximal coefficient 1 under that
    approximation. Explicit rational ``mu`` values (e.g. read back from a
    certificate) skip the floating-point step.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    if mu is not None and (len(mu) != d + 1 or any(Fraction(m) <= 0 for m in mu)):
        raise ValueError("mu must hold d + 1 positive rationals")
    alpha = Fraction(n - 2, 2)
    scale = ScaledRational(2, 1)
    mus, elems = [], []
    for k in range(d + 1):
        lk = laguerre(alpha, k)
        if mu is not None:
            mu_k = Fraction(mu[k])
        else:
            mu_k = Fraction(1) if k == 0 else _mu_from_coeffs(lk.coeffs, scale)
        mus.append(mu_k)
        elems.append(lk.scale(1 / mu_k))
    return BasisSpec("laguerre_scaled", n, d, scale, tuple(mus), tuple(elems))


def jacobi_basis(n: int, d: int) -> BasisSpec:
    fam = _jacobi_family(n, d)[: d + 1]
    return BasisSpec("jacobi_n", n, d, ScaledRational(1, 0), tuple([Fraction(1)] * (d + 1)), tuple(fam))


def custom_basis(elements: Sequence[Poly]) -> BasisSpec:
    """Triangular basis from explicit rational polynomials (b_k of degree k)."""
    for k, e in enumerate(elements):
        if e.degree != k:
            raise ValueError(f"element {k} has degree {e.degree}")
    return BasisSpec("custom", 0, len(elements) - 1, ScaledRational(1, 0), tuple([Fraction(1)] * len(elements)), tuple(elements))


def change_basis(p: Poly, target: BasisSpec) -> list:
    """Coordinates c with p = sum_k c_k b_k (triangular back-substitution).

    ``p`` is an x-basis polynomial in t. Coefficients are moved to the scaled
    variable (dividing by var_scale^j, exact for exact domains) and then
    back-substituted against the rational elements.
    """
    if p.basis != BASIS_X:
        raise TypeError("change_basis expects a monomial polynomial")
    if p.degree > target.d:
        raise ValueError(f"degree {p.degree} exceeds basis degree {target.d}")
    vs = target.var_scale
    if vs.k == 0 and vs.q == 1:
        px = p
    else:
        px = Poly([_times_pi_power(c, 1 / vs.q**j, -vs.k * j) for j, c in enumerate(p.coeffs)])
    return target.to_basis_x(px)


# ---------------------------------------------------------------------------
# Cap weight
# ---------------------------------------------------------------------------


def _sin_power_integral(m: int, alpha, s, c):
    """int_0^alpha sin^m, from the reduction formula; s, c = sin/cos alpha."""
    if m == 0:
        return alpha
    if m == 1:
        return 1 - c
    return -(s ** (m - 1)) * c / m + _sin_power_integral(m - 2, alpha, s, c) * Fraction(m - 1, m)


def _weight_constant(n: int):
    """Gamma(n/2) / (sqrt(pi) Gamma((n-1)/2)) as (rational, pi exponent)."""
    g1, h1 = gamma_half(n)
    g2, h2 = gamma_half(n - 1)
    # sqrt(pi) factors: h1 in the numerator, 1 + h2 in the denominator
    half_powers = int(h1) - 1 - int(h2)
    assert half_powers % 2 == 0
    return g1 / g2, half_powers // 2


def _check_alpha(n: int, a: float):
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if not (0 < a <= math.pi + 1e-15):
        raise ValueError(f"cap angle {a} outside (0, pi]")


def cap_weight(n: int, alpha):
    """Normalized surface measure of a cap of angular radius alpha on S^(n-1).

    Closed form via the sine-power reduction formula; evaluated at the current
    mpmath precision. n=3 reduces to (1 - cos alpha)/2.
    """
    a = to_mpf(alpha) if isinstance(alpha, (ScaledRational, Fraction, PiSum)) else mpmath.mpf(alpha)
    _check_alpha(n, float(a))
    q, e = _weight_constant(n)
    s, c = mpmath.sin(a), mpmath.cos(a)
    return to_mpf(q) * mpmath.pi**e * _sin_power_integral(n - 2, a, s, c)


def cap_weight_enclosure(n: int, alpha, bits: int = 512) -> RationalInterval:
    """Rational interval containing the cap weight."""
    a = angle_enclosure(alpha, bits + 16)
    _check_alpha(n, float(a.mid()))
    q, e = _weight_constant(n)
    s, c = sin_enclosure(a, bits + 16), cos_enclosure(a, bits + 16)
    out = pi_power_enclosure(e, bits + 16) * q * _sin_power_integral(n - 2, a, s, c)
    return RationalInterval(max(out.lo, Fraction(0)), min(out.hi, Fraction(1)))


# ---------------------------------------------------------------------------
# Sturm sequences over the rationals
# ---------------------------------------------------------------------------


def _poly_divmod(a: list, b: list) -> tuple[list, list]:
    a = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    while len(a) >= len(b) and any(a):
        shift = len(a) - len(b)
        f = a[-1] / b[-1]
        q[shift] = f
        for i, bc in enumerate(b):
            a[i + shift] -= f * bc
        a.pop()
        while a and a[-1] == 0:
            a.pop()
    return q, a


def sturm_sequence(p: Poly) -> list[Poly]:
    """Sturm chain p, p', -rem(p, p'), ... for a rational polynomial."""
    if p.domain is not Fraction:
        raise TypeError("Sturm sequences need rational coefficients")
    seq = [list(p.coeffs), list(p.derivative().coeffs)]
    while seq[-1]:
        _, r = _poly_divmod(seq[-2], seq[-1])
        if not r:
            break
        seq.append([-c for c in r])
    return [Poly(s) for s in seq if s]


def _sign_changes(vals) -> int:
    signs = [v > 0 for v in vals if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_count(p: Poly, a, b) -> int:
    """Number of distinct real roots of p in the half-open interval (a, b]."""
    a, b = as_fraction(a), as_fraction(b)
    if a >= b:
        raise ValueError("need a < b")
    seq = sturm_sequence(p)
    return _sign_changes([s(a) for s in seq]) - _sign_changes([s(b) for s in seq])
