import io
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from packbounds.cap_bounds import (
    CapInstance,
    build_cap_sdp,
    cap_bound,
    florian_cap_bound,
    parse_angle,
    prism5_sharpness_certificate,
    prism_density,
    sweep_caps,
)
from packbounds.numerics import ScaledRational
from packbounds.polynomials import cap_weight
from packbounds.solver import SolverConfig

F = Fraction
PI5, PI310 = ScaledRational(F(1, 5), 1), ScaledRational(F(3, 10), 1)
SHARP = 0.88967226177015831  # 5 w(pi/5) + 2 w(3 pi/10), see test_sharp_value_from_weights

# Delsarte-type LP (one cap size, n = 3, alpha = pi/6, polynomial degree 20)
# solved by scipy.optimize.linprog (HiGHS) on 20001 grid points of [-1, 1/2].
# Sampling relaxes the sign condition, so this value is a slight underestimate.
LP_ORACLE_PI6_D10 = 0.881439837838476


def _forbidden_max(view, n, inst, i, j, pts=1000):
    hi = math.cos(float(inst.alphas[i]) + float(inst.alphas[j]))
    if hi <= -1:
        return -math.inf
    poly = view.f_poly(n, i, j)
    with mpmath.workdps(40):
        return max(float(poly(mpmath.mpf(u))) for u in np.linspace(-1, hi, pts))


def test_sharp_value_from_weights():
    with mpmath.workdps(30):
        v = 5 * cap_weight(3, PI5) + 2 * cap_weight(3, PI310)
        ref = 5 * (1 - mpmath.cos(mpmath.pi / 5)) / 2 + 2 * (1 - mpmath.cos(3 * mpmath.pi / 10)) / 2
    assert abs(float(v) - float(ref)) < 1e-25
    assert abs(float(v) - SHARP) < 1e-15
    assert abs(prism_density(5)[2] - SHARP) < 1e-12


def test_prism5_linear_system_certificate():
    view = prism5_sharpness_certificate()
    assert view.status == "certified"
    assert abs(float(view.bound) - SHARP) < 1e-12
    assert all(view.checks["nonpositive_on_forbidden"].values())


def test_two_cap_sdp_reaches_sharp_value():
    inst = CapInstance(3, (PI5, PI310), 2)
    b, status, view = cap_bound(inst)
    assert status in ("optimal", "feasible")
    assert abs(b - SHARP) < 1e-4
    for i, j in ((0, 0), (0, 1), (1, 1)):
        assert _forbidden_max(view, 3, inst, i, j) <= 1e-8


def test_symmetry_under_swapping_sizes():
    a = cap_bound(CapInstance(3, (PI5, PI310), 2))[0]
    b = cap_bound(CapInstance(3, (PI310, PI5), 2))[0]
    assert abs(a - b) < 1e-6


def test_single_size_matches_lp_oracle():
    b, status, view = cap_bound(CapInstance(3, (ScaledRational(F(1, 6), 1),), 10), SolverConfig(113))
    assert status == "optimal"
    assert LP_ORACLE_PI6_D10 - 1e-9 <= b <= LP_ORACLE_PI6_D10 + 1e-6


def test_coefficient_matrices_are_psd():
    inst = CapInstance(3, (PI5, PI310), 2)
    b, status, view = cap_bound(inst)
    for Fk in view.f[1:]:
        assert np.linalg.eigvalsh(np.array(Fk, dtype=float))[0] >= -1e-8
    w = [float(cap_weight(3, a)) for a in inst.alphas]
    G = np.array(view.f[0], dtype=float) - np.sqrt(np.outer(w, w))
    assert np.linalg.eigvalsh(G)[0] >= -1e-8


def test_hemisphere_bound_is_one():
    # two antipodal hemispheres tile the sphere; the program handles the u = -1 case
    b, status, _ = cap_bound(CapInstance(3, (ScaledRational(F(1, 2), 1),), 2))
    assert abs(b - 1) < 1e-6


def test_higher_dimension_runs():
    b, status, view = cap_bound(CapInstance(4, (ScaledRational(F(1, 6), 1), ScaledRational(F(1, 5), 1)), 3))
    assert status in ("optimal", "feasible")
    assert 0 < b < 1


def test_florian_and_prism_cross_check():
    assert abs(florian_cap_bound([math.pi / 4] * 3) - 0.878679) < 1e-6
    assert abs(prism_density(4)[2] - 0.878679) < 1e-6
    assert abs(florian_cap_bound([math.pi / 4] * 3) - prism_density(4)[2]) < 1e-9
    with pytest.raises(ValueError):
        florian_cap_bound([math.pi / 2])


def test_parse_angle():
    assert parse_angle("pi/5") == PI5
    assert parse_angle("3*pi/10") == PI310
    assert parse_angle("3pi/10") == PI310
    assert parse_angle("2/7") == F(2, 7)
    assert parse_angle("0.5") == 0.5
    with pytest.raises(ValueError):
        parse_angle("pi*5")
    with pytest.raises(ValueError):
        parse_angle("abc")


def test_instance_validation():
    with pytest.raises(ValueError):
        CapInstance(1, (PI5,), 2)
    with pytest.raises(ValueError):
        CapInstance(3, (), 2)
    with pytest.raises(ValueError):
        CapInstance(3, (PI5,), 0)
    with pytest.raises(ValueError):
        CapInstance(3, (4.0,), 2)


def test_overlapping_pairs_get_no_sign_constraint():
    # 2 * 0.6 pi > pi: two big caps cannot coexist, so no Q/R blocks for that pair
    p = build_cap_sdp(CapInstance(3, (ScaledRational(F(3, 5), 1), PI5), 2))
    names = {b.name for b in p.blocks}
    assert "Q00" not in names and "Q01" in names and "Q11" in names


def test_sweep_writes_csv():
    buf = io.StringIO()
    rows = sweep_caps(3, [(math.pi / 5, 3 * math.pi / 10), (math.pi / 6, math.pi / 6)], 2, SolverConfig(), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "alpha1,alpha2,sdp_bound,geometric_bound,status"
    assert len(lines) == 3 and all(r[2] is not None for r in rows)
