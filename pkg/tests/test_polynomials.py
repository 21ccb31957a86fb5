import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from packbounds.numerics import PiSum, ScaledRational
from packbounds.polynomials import (
    Poly,
    cap_weight,
    cap_weight_enclosure,
    change_basis,
    fourier_inverse_radial,
    jacobi,
    laguerre,
    make_basis_B,
    sturm_count,
)

F = Fraction


def test_jacobi_low_degrees():
    for n in range(2, 9):
        assert jacobi(n, 0) == Poly([1])
        assert jacobi(n, 1) == Poly([0, 1])
    assert jacobi(3, 2) == Poly([F(-1, 2), 0, F(3, 2)])


def test_jacobi_matches_scipy_gegenbauer():
    xs = np.linspace(-1, 1, 7)
    for n in (3, 4, 5, 7):
        lam = (n - 2) / 2
        for k in range(8):
            p = jacobi(n, k)
            ref = special.eval_gegenbauer(k, lam, xs) / special.eval_gegenbauer(k, lam, 1.0)
            got = [float(p(F(x))) for x in xs]
            assert np.allclose(got, ref, atol=1e-12)


def test_jacobi_bounded_by_one():
    xs = [F(i, 50) for i in range(-50, 51)]
    for n in (2, 3, 4, 6):
        for k in range(0, 41, 5):
            p = jacobi(n, k)
            assert p(F(1)) == 1
            assert max(abs(p(x)) for x in xs) <= 1


def test_jacobi_orthogonality():
    for n in (3, 4, 5):
        for k in range(6):
            for l in range(k + 1, 7):
                pk = np.poly1d([float(c) for c in reversed(jacobi(n, k).coeffs)])
                pl = np.poly1d([float(c) for c in reversed(jacobi(n, l).coeffs)])
                val, _ = integrate.quad(lambda u: pk(u) * pl(u) * (1 - u * u) ** ((n - 3) / 2), -1, 1)
                assert abs(val) < 1e-10


def test_laguerre_examples():
    assert laguerre(F(1, 2), 0) == Poly([1])
    for a in (F(0), F(1, 2), F(3)):
        assert laguerre(a, 1) == Poly([1 + a, -1])
    assert laguerre(0, 2) == Poly([1, -2, F(1, 2)])


def test_laguerre_series_oracle():
    # explicit sum_j (-1)^j binom(k+a, k-j) x^j / j!
    for a in (F(-1, 2), F(0), F(1, 2), F(5, 2)):
        for k in range(7):
            got = laguerre(a, k).coeffs
            for j in range(k + 1):
                num = F(1)
                for i in range(k - j):
                    num *= (k + a - i)
                binom = num / math.factorial(k - j)
                assert got[j] == (-1) ** j * binom / math.factorial(j)


def test_fourier_inverse_constant_and_t2():
    for n in (1, 2, 3, 5):
        q = fourier_inverse_radial(n, Poly([1], "x2"))
        assert q.coeffs[0] == 1 and q.degree == 0
    q = fourier_inverse_radial(2, Poly([0, 1], "x2"))
    assert q.coeffs[0] == PiSum({-1: 1})
    assert q.coeffs[1] == PiSum({0: -1})


def _radial_ft2(p, w):
    # 2D radial inverse transform: 2 pi int p(r) e^{-pi r^2} J0(2 pi r w) r dr
    f = lambda r: 2 * math.pi * p(r) * math.exp(-math.pi * r * r) * special.j0(2 * math.pi * r * w) * r
    return integrate.quad(f, 0, 12, limit=200)[0]


def test_fourier_inverse_2d_numerical_oracle():
    q = fourier_inverse_radial(2, Poly([0, 1], "x2"))
    for w in (0.0, 0.5, 1.0):
        ref = _radial_ft2(lambda r: r * r, w) / math.exp(-math.pi * w * w)
        assert abs(float(q(PiSum({0: F(w)})).to_mpf()) - ref) < 1e-9
        assert abs((1 / math.pi - w * w) - ref) < 1e-9


def test_fourier_inverse_linearity():
    rng = random.Random(3)
    for _ in range(10):
        p = Poly([F(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(5)], "x2")
        a = fourier_inverse_radial(3, p.scale(2))
        b = fourier_inverse_radial(3, p).scale(2)
        assert a == b


def test_fourier_inverse_odd_rejected():
    with pytest.raises(ValueError):
        fourier_inverse_radial(2, Poly([0, 1]))


def _forward_radial(n, q):
    # forward map on Gaussian-times-polynomial: same formula (self-dual up to sign of the
    # Laguerre argument convention), checked through round trip
    return fourier_inverse_radial(n, q)


def test_fourier_involution_exact():
    # the Gaussian transform is an involution on radial functions:
    # applying the map twice returns the original coefficients
    rng = random.Random(5)
    for n in (1, 2, 3, 4):
        p = Poly([PiSum({0: F(rng.randint(-5, 5), rng.randint(1, 4))}) for _ in range(4)], "x2")
        assert _forward_radial(n, fourier_inverse_radial(n, p)) == p


def test_poisson_n1():
    rng = random.Random(11)
    with mpmath.workdps(30):
        for _ in range(4):
            p = Poly([F(rng.randint(-5, 5), rng.randint(1, 5)) for _ in range(4)], "x2")
            q = fourier_inverse_radial(1, p).to_mpf()
            pm = p.to_mpf()
            lhs = mpmath.fsum(q(mpmath.mpf(v)) * mpmath.exp(-mpmath.pi * v * v) for v in range(-20, 21))
            rhs = mpmath.fsum(pm(mpmath.mpf(u)) * mpmath.exp(-mpmath.pi * u * u) for u in range(-20, 21))
            assert abs(lhs - rhs) < mpmath.mpf(10) ** -25


def test_basis_B_examples():
    b = make_basis_B(2, 4)
    assert b.mu[0] == 1 and b.element(0) == Poly([ScaledRational(1, 0)])
    b1 = b.element(1)
    with mpmath.workprec(256):
        assert abs(b1.coeffs[0].to_mpf() - 1 / (2 * mpmath.pi)) < 1e-60
        assert abs(b1.coeffs[1].to_mpf() + 1) < mpmath.mpf(2) ** -250
    for n in (2, 3, 4):
        bb = make_basis_B(n, 8)
        with mpmath.workprec(256):
            for k in range(9):
                m = max(abs(c.to_mpf()) for c in bb.element(k).coeffs)
                assert abs(m - 1) < mpmath.mpf(2) ** -250


def test_change_basis_examples():
    b = make_basis_B(3, 5)
    c = change_basis(b.element(3), b)
    assert [x == (1 if k == 3 else 0) for k, x in enumerate(c)] == [True] * 6
    assert all(x == 0 for x in change_basis(Poly([]), b))
    with pytest.raises(ValueError):
        change_basis(Poly([F(1)] * 7), b)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.fractions(min_value=-10, max_value=10, max_denominator=20), min_size=1, max_size=6))
def test_change_basis_round_trip(cs):
    b = make_basis_B(4, 5)
    p = Poly(cs)
    c = change_basis(p, b)
    back = None
    for k, ck in enumerate(c):
        term = b.element(k).map(lambda e, ck=ck: PiSum.lift(e) * ck)
        back = term if back is None else back + term
    assert [back.coeff(j) == PiSum.lift(p.coeff(j)) for j in range(6)] == [True] * 6


def test_cap_weight_examples():
    with mpmath.workdps(40):
        assert abs(cap_weight(3, mpmath.pi / 5) - (1 - mpmath.cos(mpmath.pi / 5)) / 2) < 1e-35
        for n in range(2, 10):
            assert abs(cap_weight(n, mpmath.pi) - 1) < 1e-35
            assert abs(cap_weight(n, mpmath.pi / 2) - mpmath.mpf(1) / 2) < 1e-35


def test_cap_weight_quadrature_oracle():
    for n in range(2, 10):
        c = special.gamma(n / 2) / (math.sqrt(math.pi) * special.gamma((n - 1) / 2))
        for a in (0.1, 0.7, 1.3, 2.9):
            ref = c * integrate.quad(lambda u: (1 - u * u) ** ((n - 3) / 2), math.cos(a), 1)[0]
            assert abs(float(cap_weight(n, a)) - ref) < 1e-9


def test_cap_weight_monotone_and_symmetric():
    for n in (2, 3, 4, 6):
        prev = 0
        for i in range(1, 40):
            a = math.pi * i / 40
            w = cap_weight(n, a)
            assert w > prev
            prev = w
            assert abs(w + cap_weight(n, math.pi - a) - 1) < 1e-12 if i < 40 else True


def test_cap_weight_enclosure_contains():
    with mpmath.workdps(120):
        for n in (2, 3, 4, 5):
            for a in (ScaledRational(F(1, 5), 1), ScaledRational(F(3, 10), 1), F(1, 3)):
                iv = cap_weight_enclosure(n, a, 200)
                v = cap_weight(n, a)
                assert mpmath.mpf(iv.lo.numerator) / iv.lo.denominator <= v <= mpmath.mpf(iv.hi.numerator) / iv.hi.denominator
                assert iv.width() < F(1, 2**150)
    with pytest.raises(ValueError):
        cap_weight(3, 4.0)


def test_sturm_count():
    p = Poly([F(-2), 0, 1])  # x^2 - 2
    assert sturm_count(p, -2, 2) == 2
    assert sturm_count(p, 0, 2) == 1
    q = Poly([0, F(-1), 0, 1])  # x^3 - x
    assert sturm_count(q, F(-3, 2), F(3, 2)) == 3
    assert sturm_count(q * q, F(-3, 2), F(3, 2)) == 3
