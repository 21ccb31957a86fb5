"""Exact arithmetic substrate.

Rationals are :class:`fractions.Fraction`. Two small value types sit on top:

* :class:`ScaledRational` -- an exact number ``q * pi**k``.
* :class:`RationalInterval` -- a closed interval with rational endpoints.

Every transcendental quantity the certification path needs (powers of pi,
cosines of angles, square roots) is produced as a :class:`RationalInterval`
whose truncation error is bounded inside the routine that builds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Union

import gmpy2
import mpmath

__all__ = [
    "ScaledRational",
    "PiSum",
    "RationalInterval",
    "as_fraction",
    "pi_enclosure",
    "pi_power_enclosure",
    "gamma_half",
    "ball_volume",
    "sqrt_enclosure",
    "cos_enclosure",
    "sin_enclosure",
    "exp_enclosure",
    "angle_enclosure",
    "enclose",
    "to_mpf",
]

RationalLike = Union[int, Fraction]


def as_fraction(x) -> Fraction:
    """Exact conversion of ints, Fractions, floats and mpf values."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, mpmath.mpf):
        sign, man, exp, _ = x._mpf_
        if not man and exp:
            raise ValueError("cannot convert inf/nan to Fraction")
        man = -int(man) if sign else int(man)
        return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)
    if isinstance(x, str):
        return Fraction(x)
    if type(x).__name__ == "mpfr":
        q = gmpy2.mpq(x)
        return Fraction(int(q.numerator), int(q.denominator))
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction exactly")


def to_mpf(x):
    """Convert a Fraction / ScaledRational / number to an mpf at the current precision."""
    if isinstance(x, ScaledRational):
        return x.to_mpf()
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, RationalInterval):
        return to_mpf(x.mid())
    if isinstance(x, PiSum):
        return x.to_mpf()
    return mpmath.mpf(x)


# ---------------------------------------------------------------------------
# ScaledRational
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaledRational:
    """The exact value ``q * pi**k``.

    Addition is only defined between values with the same power of pi; mixing
    powers raises ``TypeError`` so that nothing is silently rounded.
    """

    q: Fraction
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "q", as_fraction(self.q))
        object.__setattr__(self, "k", int(self.k))

    @staticmethod
    def _lift(other) -> "ScaledRational":
        if isinstance(other, ScaledRational):
            return other
        if isinstance(other, (int, Fraction)):
            return ScaledRational(Fraction(other), 0)
        return NotImplemented

    def is_zero(self) -> bool:
        return self.q == 0

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        if self.q == 0:
            return other
        if other.q == 0:
            return self
        if other.k != self.k:
            raise TypeError(
                f"cannot add pi^{self.k} and pi^{other.k} terms exactly; "
                "enclose them with pi_power_enclosure first"
            )
        return ScaledRational(self.q + other.q, self.k)

    __radd__ = __add__

    def __neg__(self):
        return ScaledRational(-self.q, self.k)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        if self.q == 0 or other.q == 0:
            return ScaledRational(Fraction(0), self.k + other.k)
        return ScaledRational(self.q * other.q, self.k + other.k)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        if other.q == 0:
            raise ZeroDivisionError("ScaledRational division by zero")
        return ScaledRational(self.q / other.q, self.k - other.k)

    def __rtruediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __pow__(self, e: int):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return ScaledRational(Fraction(1), 0) / (self ** (-e))
        return ScaledRational(self.q**e, self.k * e)

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        if self.q == 0 and other.q == 0:
            return True
        return self.q == other.q and self.k == other.k

    def __hash__(self):
        return hash((self.q, self.k)) if self.q != 0 else hash(0)

    def __abs__(self):
        return ScaledRational(abs(self.q), self.k)

    def to_mpf(self):
        return to_mpf(self.q) * mpmath.pi**self.k

    def __float__(self):
        with mpmath.workprec(80):
            return float(self.to_mpf())

    def enclose(self, bits: int = 512) -> "RationalInterval":
        return RationalInterval.point(self.q) * pi_power_enclosure(self.k, bits)

    def __repr__(self):
        if self.k == 0:
            return f"ScaledRational({self.q})"
        return f"ScaledRational({self.q}*pi^{self.k})"


class PiSum:
    """Exact finite sum ``sum_k q_k * pi**k`` (a Laurent polynomial in pi).

    This is the closure of :class:`ScaledRational` under addition. It is what
    radial Fourier inverses and basis changes produce when terms with
    different powers of pi meet.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for k, q in dict(terms).items():
                q = as_fraction(q)
                if q != 0:
                    clean[int(k)] = q
        self.terms = clean

    @classmethod
    def lift(cls, x) -> "PiSum":
        if isinstance(x, PiSum):
            return x
        if isinstance(x, ScaledRational):
            return cls({x.k: x.q})
        if isinstance(x, (int, Fraction)):
            return cls({0: Fraction(x)})
        raise TypeError(f"cannot lift {type(x).__name__} to PiSum")

    def _coerce(self, other):
        try:
            return PiSum.lift(other)
        except TypeError:
            return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for k, q in other.terms.items():
            out[k] = out.get(k, 0) + q
        return PiSum(out)

    __radd__ = __add__

    def __neg__(self):
        return PiSum({k: -q for k, q in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict[int, Fraction] = {}
        for k1, q1 in self.terms.items():
            for k2, q2 in other.terms.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + q1 * q2
        return PiSum(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        # only division by a single term is exact
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if len(other.terms) != 1:
            raise TypeError("PiSum division needs a single-term divisor")
        (k, q), = other.terms.items()
        return PiSum({j: c / q for j, c in self.terms.items()}) * PiSum({-k: 1})

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def rational_part(self) -> Fraction:
        """The value when the sum has no pi terms; raises otherwise."""
        if any(k != 0 for k in self.terms):
            raise ValueError("PiSum has pi-dependent terms")
        return self.terms.get(0, Fraction(0))

    def to_mpf(self):
        return mpmath.fsum(to_mpf(q) * mpmath.pi**k for k, q in self.terms.items())

    def __float__(self):
        with mpmath.workprec(80):
            return float(self.to_mpf())

    def enclose(self, bits: int = 512) -> "RationalInterval":
        out = RationalInterval.point(0)
        for k, q in self.terms.items():
            out = out + RationalInterval.point(q) * pi_power_enclosure(k, bits)
        return out

    def __repr__(self):
        if not self.terms:
            return "PiSum(0)"
        parts = [f"{q}*pi^{k}" if k else f"{q}" for k, q in sorted(self.terms.items())]
        return "PiSum(" + " + ".join(parts) + ")"


# ---------------------------------------------------------------------------
# RationalInterval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalInterval:
    """Closed interval ``[lo, hi]`` with rational endpoints.

    +, -, * are exact on the endpoints; division requires a divisor interval
    that excludes zero. Mixed operations with ints and Fractions treat the
    scalar as a point interval.
    """

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = as_fraction(self.lo), as_fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x) -> "RationalInterval":
        x = as_fraction(x)
        return cls(x, x)

    @classmethod
    def hull(cls, *xs) -> "RationalInterval":
        los, his = [], []
        for x in xs:
            x = cls._lift(x)
            los.append(x.lo)
            his.append(x.hi)
        return cls(min(los), max(his))

    @staticmethod
    def _lift(x) -> "RationalInterval":
        if isinstance(x, RationalInterval):
            return x
        if isinstance(x, (int, Fraction)):
            return RationalInterval(Fraction(x), Fraction(x))
        if isinstance(x, (ScaledRational, PiSum)):
            return x.enclose()
        return NotImplemented

    def width(self) -> Fraction:
        return self.hi - self.lo

    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def mag(self) -> Fraction:
        """Largest absolute value in the interval."""
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> Fraction:
        """Smallest absolute value in the interval."""
        if self.lo <= 0 <= self.hi:
            return Fraction(0)
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        if isinstance(x, RationalInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, float):
            x = Fraction(x)
        elif isinstance(x, mpmath.mpf):
            x = as_fraction(x)
        return self.lo <= x <= self.hi

    __contains__ = contains

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalInterval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return RationalInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalInterval(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            a, b = self.lo * other, self.hi * other
            return RationalInterval(min(a, b), max(a, b))
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        ps = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return RationalInterval(min(ps), max(ps))

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalInterval":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError(f"interval {self} contains zero")
        return RationalInterval(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return self * (1 / Fraction(other))
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.reciprocal()

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 0:
            return NotImplemented
        if e == 0:
            return RationalInterval.point(1)
        lo, hi = self.lo**e, self.hi**e
        if e % 2 == 1:
            return RationalInterval(lo, hi)
        if self.lo >= 0:
            return RationalInterval(lo, hi)
        if self.hi <= 0:
            return RationalInterval(hi, lo)
        return RationalInterval(Fraction(0), max(lo, hi))

    def __abs__(self):
        return RationalInterval(self.mig(), self.mag())

    def round_out(self, bits: int) -> "RationalInterval":
        """Outward rounding of both endpoints onto the grid ``2**-bits``."""
        scale = 1 << bits
        lo = Fraction(math.floor(self.lo * scale), scale)
        hi = Fraction(math.ceil(self.hi * scale), scale)
        return RationalInterval(lo, hi)

    def sqrt(self, bits: int = 512) -> "RationalInterval":
        return sqrt_enclosure(self, bits)

    def to_mpf(self):
        return to_mpf(self.mid())

    def __float__(self):
        return float(self.mid())

    def __repr__(self):
        with mpmath.workdps(20):
            return f"RationalInterval[{mpmath.nstr(to_mpf(self.lo), 17)}, {mpmath.nstr(to_mpf(self.hi), 17)}]"


# ---------------------------------------------------------------------------
# pi and friends
# ---------------------------------------------------------------------------


def _arctan_inv_bracket(x: int, terms: int) -> RationalInterval:
    """Bracket of arctan(1/x) from the alternating series.

    Successive partial sums straddle the limit, so [S_N, S_{N+1}] (ordered)
    encloses it; brackets are nested as ``terms`` grows.
    """
    s = Fraction(0)
    x2 = x * x
    power = x  # x^(2k+1)
    for k in range(terms):
        t = Fraction(1, (2 * k + 1) * power)
        s = s + t if k % 2 == 0 else s - t
        power *= x2
    nxt = Fraction(1, (2 * terms + 1) * power)
    s2 = s + nxt if terms % 2 == 0 else s - nxt
    return RationalInterval(min(s, s2), max(s, s2))


@lru_cache(maxsize=64)
def pi_enclosure(bits: int) -> RationalInterval:
    """Interval of width at most ``2**-bits`` containing pi.

    Uses Machin's formula pi = 16 arctan(1/5) - 4 arctan(1/239) with the
    alternating-series bracket as the truncation bound. The raw enclosures
    are nested in the term count, and the outward rounding grid refines with
    ``bits``, so ``pi_enclosure(b + 1)`` lies inside ``pi_enclosure(b)``.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    # terms needed so that 16/(5^(2N+1)(2N+1)) + 4/(239^(2N+1)(2N+1)) <= 2^-(bits+3)
    n5 = 1
    while Fraction(16, (2 * n5 + 1) * 5 ** (2 * n5 + 1)) > Fraction(1, 2 ** (bits + 4)):
        n5 += 1
    n239 = 1
    while Fraction(4, (2 * n239 + 1) * 239 ** (2 * n239 + 1)) > Fraction(1, 2 ** (bits + 4)):
        n239 += 1
    raw = 16 * _arctan_inv_bracket(5, n5) - 4 * _arctan_inv_bracket(239, n239)
    return raw.round_out(bits + 2)


@lru_cache(maxsize=256)
def pi_power_enclosure(k: int, bits: int = 512) -> RationalInterval:
    """Enclosure of ``pi**k`` for any integer ``k``; width shrinks with ``bits``."""
    if k == 0:
        return RationalInterval.point(1)
    # extra bits absorb the growth of pi^|k|
    extra = 2 * abs(k) + 8
    p = pi_enclosure(bits + extra)
    if k > 0:
        out = p**k
    else:
        out = (p ** (-k)).reciprocal()
    return out.round_out(bits + extra)


def gamma_half(m: int) -> tuple[Fraction, bool]:
    """Gamma(m/2) as ``(rational, sqrt_pi_flag)``.

    The value is ``rational * sqrt(pi)`` when the flag is set, else ``rational``.
    """
    if m <= 0:
        raise ValueError("gamma_half needs m >= 1")
    if m % 2 == 0:
        return Fraction(math.factorial(m // 2 - 1)), False
    # Gamma(1/2) = sqrt(pi); Gamma(x + 1) = x Gamma(x)
    q = Fraction(1)
    x = Fraction(1, 2)
    while x < Fraction(m, 2):
        q *= x
        x += 1
    return q, True


def ball_volume(n: int, r) -> ScaledRational:
    """Volume of the n-ball of rational radius r, as ``q * pi**floor(n/2)``."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    r = as_fraction(r)
    if r <= 0:
        raise ValueError("radius must be positive")
    g, half = gamma_half(n + 2)  # Gamma(n/2 + 1)
    if n % 2 == 0:
        assert not half
        return ScaledRational(r**n / g, n // 2)
    # pi^(n/2) / (g sqrt(pi)) = pi^((n-1)/2) / g
    return ScaledRational(r**n / g, (n - 1) // 2)


def sqrt_enclosure(x, bits: int = 512) -> RationalInterval:
    """Enclosure of the square root of a nonnegative rational or interval."""
    x = RationalInterval._lift(x) if not isinstance(x, RationalInterval) else x
    if x.lo < 0:
        raise ValueError("sqrt of an interval with negative part")
    scale = 1 << (2 * bits)

    def lower(v: Fraction) -> Fraction:
        return Fraction(math.isqrt(math.floor(v * scale)), 1 << bits)

    def upper(v: Fraction) -> Fraction:
        s = math.isqrt(math.ceil(v * scale))
        if s * s < math.ceil(v * scale):
            s += 1
        return Fraction(s, 1 << bits)

    return RationalInterval(lower(x.lo), upper(x.hi))


def _taylor_cos_sin(q: Fraction, bits: int, want_sin: bool) -> RationalInterval:
    # Lagrange remainder: |R_N| <= |q|^(N+1) / (N+1)!
    total = Fraction(0)
    term = Fraction(1) if not want_sin else q
    j = 0 if not want_sin else 1
    q2 = q * q
    sign = 1
    tol = Fraction(1, 1 << (bits + 4))
    while True:
        total += sign * term
        nxt = term * q2 / ((j + 1) * (j + 2))
        j += 2
        sign = -sign
        if abs(nxt) < tol and j > 2 * abs(q) + 2:
            err = abs(nxt)
            return RationalInterval(total - err, total + err)
        term = nxt


def _interval_trig(x, bits: int, want_sin: bool) -> RationalInterval:
    x = RationalInterval._lift(x) if not isinstance(x, RationalInterval) else x
    # trig is 1-Lipschitz: widen the value at the (dyadically rounded) midpoint
    m = x.mid()
    scale = 1 << (bits + 8)
    md = Fraction(round(m * scale), scale)
    radius = max(abs(x.hi - md), abs(x.lo - md))
    core = _taylor_cos_sin(md, bits + 8, want_sin)
    out = RationalInterval(core.lo - radius, core.hi + radius).round_out(bits + 4)
    return RationalInterval(max(out.lo, Fraction(-1)), min(out.hi, Fraction(1)))


def cos_enclosure(x, bits: int = 512) -> RationalInterval:
    """Enclosure of cos over a rational point or interval argument."""
    return _interval_trig(x, bits, want_sin=False)


def sin_enclosure(x, bits: int = 512) -> RationalInterval:
    """Enclosure of sin over a rational point or interval argument."""
    return _interval_trig(x, bits, want_sin=True)


def _exp_small(q: Fraction, bits: int) -> RationalInterval:
    # 0 <= q <= 1/2: positive series, remainder <= 2 * next term
    total, term, j = Fraction(0), Fraction(1), 0
    tol = Fraction(1, 1 << (bits + 4))
    while True:
        total += term
        j += 1
        term = term * q / j
        if term < tol:
            return RationalInterval(total, total + 2 * term).round_out(bits + 4)


def _exp_nonneg(q: Fraction, bits: int) -> RationalInterval:
    s = 0
    while q / (1 << s) > Fraction(1, 2):
        s += 1
    out = _exp_small(q / (1 << s), bits + 2 * s + 8)
    for _ in range(s):
        out = (out * out).round_out(bits + 2 * s + 8)
    return out


def exp_enclosure(x, bits: int = 512) -> RationalInterval:
    """Enclosure of exp over a rational point or interval argument."""
    x = RationalInterval._lift(x) if not isinstance(x, RationalInterval) else x

    def at(v: Fraction) -> RationalInterval:
        if v >= 0:
            return _exp_nonneg(v, bits)
        return _exp_nonneg(-v, bits + 8).reciprocal()

    # exp is increasing: lower end from x.lo, upper end from x.hi
    lo, hi = at(x.lo), at(x.hi)
    return RationalInterval(lo.lo, hi.hi).round_out(bits)


def enclose(x, bits: int = 512) -> RationalInterval:
    """Enclosure of any exact scalar (int, Fraction, ScaledRational, PiSum, interval)."""
    if isinstance(x, RationalInterval):
        return x
    if isinstance(x, (ScaledRational, PiSum)):
        return x.enclose(bits)
    if isinstance(x, (int, Fraction)):
        return RationalInterval.point(x)
    if isinstance(x, (float, mpmath.mpf)):
        # a binary float is an exact rational
        return RationalInterval.point(as_fraction(x))
    raise TypeError(f"cannot enclose {type(x).__name__}")


def angle_enclosure(alpha, bits: int = 512) -> RationalInterval:
    """Enclosure of an angle given as float, Fraction or ScaledRational (q*pi)."""
    if isinstance(alpha, ScaledRational):
        return alpha.enclose(bits)
    if isinstance(alpha, RationalInterval):
        return alpha
    return RationalInterval.point(as_fraction(alpha))
