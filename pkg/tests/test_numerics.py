from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from packbounds.numerics import (
    RationalInterval,
    ScaledRational,
    ball_volume,
    cos_enclosure,
    gamma_half,
    pi_enclosure,
    pi_power_enclosure,
    sin_enclosure,
    sqrt_enclosure,
)

mpmath.mp.dps = 60
PI = mpmath.mp.pi


def _mpf(q):
    return mpmath.mpf(q.numerator) / q.denominator


def _encloses(iv, x):
    return _mpf(iv.lo) <= x <= _mpf(iv.hi)


def test_pi_one_bit():
    iv = pi_enclosure(1)
    assert Fraction(3) <= iv.lo and iv.hi <= Fraction(13, 4)
    assert _encloses(iv, PI)


def test_pi_thirty_bits():
    iv = pi_enclosure(30)
    assert iv.width() <= Fraction(1, 2**30)
    assert _encloses(iv, PI)


def test_pi_nesting():
    for b in range(1, 61):
        assert pi_enclosure(b + 1).lo >= pi_enclosure(b).lo
        assert pi_enclosure(b + 1).hi <= pi_enclosure(b).hi


def test_pi_width_halves():
    for b in range(1, 41):
        assert pi_enclosure(b + 1).width() <= pi_enclosure(b).width() / 2 or pi_enclosure(b + 1).width() <= Fraction(1, 2 ** (b + 1))
        assert pi_enclosure(b).width() <= Fraction(1, 2**b)


def test_pi_powers():
    assert pi_power_enclosure(0, 30) == RationalInterval.point(1)
    assert _encloses(pi_power_enclosure(2, 30), PI**2)
    assert _encloses(pi_power_enclosure(-1, 30), 1 / PI)
    assert pi_power_enclosure(3, 60).width() < pi_power_enclosure(3, 30).width()
    with mpmath.workdps(120):
        for k in range(-6, 7):
            assert _encloses(pi_power_enclosure(k, 200), mpmath.pi**k)


def test_gamma_half_values():
    assert gamma_half(2) == (Fraction(1), False)
    assert gamma_half(1) == (Fraction(1), True)
    assert gamma_half(5) == (Fraction(3, 4), True)
    with pytest.raises(ValueError):
        gamma_half(0)


def test_gamma_half_recurrence():
    for m in range(1, 41):
        a, fa = gamma_half(m)
        b, fb = gamma_half(m + 2)
        assert fa == fb
        assert b == Fraction(m, 2) * a
        expect = mpmath.gamma(mpmath.mpf(m) / 2)
        got = _mpf(a) * (mpmath.sqrt(PI) if fa else 1)
        assert abs(got - expect) < mpmath.mpf(10) ** -40 * expect


def test_ball_volume():
    assert ball_volume(2, 1) == ScaledRational(1, 1)
    assert ball_volume(3, 1) == ScaledRational(Fraction(4, 3), 1)
    assert ball_volume(4, Fraction(1, 2)) == ScaledRational(Fraction(1, 32), 2)
    for n in range(1, 11):
        v = ball_volume(n, 1)
        g, half = gamma_half(n + 2)
        # vol * Gamma(n/2+1) == pi^(n/2)
        prod = v * ScaledRational(g, 0)
        if half:
            # pi^(n/2) = pi^((n-1)/2) * sqrt(pi); sqrt(pi) sits inside Gamma
            assert prod == ScaledRational(1, (n - 1) // 2)
        else:
            assert prod == ScaledRational(1, n // 2)
        assert abs(v.to_mpf() - PI ** (mpmath.mpf(n) / 2) / mpmath.gamma(mpmath.mpf(n) / 2 + 1)) < 1e-40


def test_scaled_rational_mixed_add_rejected():
    with pytest.raises(TypeError):
        ScaledRational(1, 1) + ScaledRational(1, 2)
    assert ScaledRational(Fraction(2, 4), 1).q == Fraction(1, 2)
    assert ScaledRational(1, 1) + ScaledRational(2, 1) == ScaledRational(3, 1)
    assert ScaledRational(0, 3) + ScaledRational(5, 1) == ScaledRational(5, 1)


fracs = st.fractions(min_value=-100, max_value=100, max_denominator=1000)


@st.composite
def intervals(draw):
    a, b = draw(fracs), draw(fracs)
    return RationalInterval(min(a, b), max(a, b))


@st.composite
def interval_and_member(draw):
    iv = draw(intervals())
    t = draw(st.fractions(min_value=0, max_value=1, max_denominator=100))
    return iv, iv.lo + t * (iv.hi - iv.lo)


@settings(max_examples=200, deadline=None)
@given(interval_and_member(), interval_and_member())
def test_interval_soundness(p, q):
    (A, a), (B, b) = p, q
    assert (A + B).contains(a + b)
    assert (A - B).contains(a - b)
    assert (A * B).contains(a * b)
    if not (B.lo <= 0 <= B.hi):
        assert (A / B).contains(a / b)
    else:
        with pytest.raises(ZeroDivisionError):
            A / B


@settings(max_examples=100, deadline=None)
@given(st.fractions(min_value=0, max_value=50, max_denominator=1000))
def test_sqrt_enclosure(x):
    iv = sqrt_enclosure(x, 64)
    assert iv.lo**2 <= x <= iv.hi**2
    assert iv.width() <= Fraction(2, 2**64)


@settings(max_examples=100, deadline=None)
@given(st.fractions(min_value=-7, max_value=7, max_denominator=1000))
def test_trig_enclosures(x):
    c, s = cos_enclosure(x, 80), sin_enclosure(x, 80)
    assert _encloses(c, mpmath.cos(_mpf(x)))
    assert _encloses(s, mpmath.sin(_mpf(x)))
    assert c.width() < Fraction(1, 2**70)


def test_trig_of_pi_multiple():
    iv = cos_enclosure(ScaledRational(Fraction(2, 5), 1).enclose(200), 150)
    assert _encloses(iv, mpmath.cos(2 * PI / 5))
    assert iv.width() < Fraction(1, 2**140)
