import io
import math
from fractions import Fraction

import numpy as np
import pytest

from packbounds.ce_improved import (
    BUILTIN_TABLES,
    CeInstance,
    TangencyTable,
    builtin_table,
    ce_bound,
    center_density,
    load_table,
    t_of_eps,
)
from packbounds.euclidean_bounds import SphereInstance, sphere_bound
from packbounds.numerics import ball_volume
from packbounds.solver import SolverConfig

F = Fraction


def test_t_of_eps():
    assert t_of_eps(0) == F(1, 2)
    assert t_of_eps(F("0.022753")) == 1 - F(1, 2) / F("1.022753") ** 2
    ts = [t_of_eps(F(k, 100)) for k in range(0, 41, 5)]
    assert all(a < b for a, b in zip(ts, ts[1:]))
    with pytest.raises(ValueError):
        t_of_eps(F(1, 2))
    with pytest.raises(ValueError):
        t_of_eps(-F(1, 100))


def test_builtin_tables_are_valid():
    for n in BUILTIN_TABLES:
        t = builtin_table(n)
        assert t.m == len(BUILTIN_TABLES[n])
        assert t.U == sorted(t.U)
    assert builtin_table(3).rows[0] == (F("0.022753"), F(12))
    with pytest.raises(KeyError):
        builtin_table(8)


def test_table_validation_and_loading():
    with pytest.raises(ValueError):
        TangencyTable(3, ((F(1, 10), 12), (F(1, 20), 13)))
    with pytest.raises(ValueError):
        TangencyTable(3, ((F(1, 20), 13), (F(1, 10), 12)))
    with pytest.raises(ValueError):
        TangencyTable(3, ((F(1, 2), 13),))
    t = load_table(io.StringIO("epsilon,U\n0.022753,12\n0.054092,13\n"), 3)
    assert t.rows == builtin_table(3).rows[:2]
    with pytest.raises(ValueError):
        load_table(io.StringIO("eps,U\n0.1,1\n"), 3)
    with pytest.raises(ValueError):
        load_table(io.StringIO("epsilon,U\n0.1\n"), 3)


def test_center_density():
    assert abs(center_density(3, math.pi / math.sqrt(18)) - 1 / (4 * math.sqrt(2))) < 1e-12


def test_empty_table_is_the_plain_program():
    b, c, view = ce_bound(CeInstance(3, TangencyTable(3, ()), 5))
    ref = sphere_bound(SphereInstance(3, (F(1, 2), F(1, 2)), 5))[0]
    assert abs(b - ref) < 1e-7


def test_table_improves_and_solution_is_valid():
    n, d = 3, 7
    b0, c0, _ = ce_bound(CeInstance(n, TangencyTable(n, ()), d))
    b, c, view = ce_bound(CeInstance(n, builtin_table(n), d))
    assert c <= c0 + 1e-9
    assert c >= 1 / (4 * math.sqrt(2))
    # strong duality between the merged program and the primal LP in A_k
    assert abs(view.checks["lp_value"] - b) < 1e-6
    assert view.checks["min_dual_slack"] >= -1e-8
    eps = view.eps
    # f <= 0 beyond the last shell, f <= eta_k on shell k
    for w in np.linspace(1 + float(eps[-1]), 6, 1000):
        assert float(view.f(w)) <= 1e-8
    edges = [1.0] + [1 + float(e) for e in eps]
    for k in range(len(eps)):
        for w in np.linspace(edges[k], edges[k + 1], 200):
            assert float(view.f(w)) <= float(view.eta[k]) + 1e-8
    for t in np.linspace(0, 6, 300):
        assert float(view.phi(t)) >= -1e-8
    assert float(view.phi(0)) >= float(ball_volume(n, F(1, 2))) - 1e-8


def test_relaxing_a_row_never_helps():
    n, d = 3, 5
    full = ce_bound(CeInstance(n, builtin_table(n), d))[0]
    fewer = ce_bound(CeInstance(n, builtin_table(n).without(0), d))[0]
    assert full <= fewer + 1e-8
