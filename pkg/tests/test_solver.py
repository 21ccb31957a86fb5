from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from packbounds.sdp_model import DIAG, PSD, SdpProblem
from packbounds.solver import RecentreError, SolverConfig, feasibility_recentre, solve

F = Fraction


def _min_eig_problem(C):
    """min <C, X> s.t. tr X = 1, X PSD; the optimum is the smallest eigenvalue of C."""
    n = len(C)
    p = SdpProblem("min")
    X = p.add_block("X", n)
    p.add_constraint("=", 1, [(X, i, i, F(1)) for i in range(n)])
    p.set_objective([(X, i, j, F(C[i][j])) for i in range(n) for j in range(i, n)])
    return p


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_min_eigenvalue_program(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-5, 6, size=(n, n))
    C = (A + A.T).tolist()
    sol = solve(_min_eig_problem(C))
    assert sol.status == "optimal"
    lam = np.linalg.eigvalsh(np.array(C, float))[0]
    assert abs(float(sol.objective) - lam) < 1e-6 * max(1, abs(lam))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_lp_against_scipy(seed):
    rng = np.random.default_rng(seed)
    m, n = 3, 6
    A = rng.integers(-3, 4, size=(m, n))
    x0 = rng.integers(1, 4, size=n)
    b = A @ x0
    c = rng.integers(1, 6, size=n)
    p = SdpProblem("min")
    x = p.add_block("x", n, DIAG)
    for i in range(m):
        p.add_constraint("=", int(b[i]), [(x, j, j, int(A[i, j])) for j in range(n)])
    p.set_objective([(x, j, j, int(c[j])) for j in range(n)])
    ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    sol = solve(p)
    assert sol.status in ("optimal", "feasible")
    assert abs(float(sol.objective) - ref.fun) < 1e-5 * max(1, abs(ref.fun))


def test_high_precision_reaches_small_residuals():
    C = [[2, 1, 0], [1, 3, 1], [0, 1, 4]]
    sol = solve(_min_eig_problem(C), SolverConfig(113))
    assert sol.status == "optimal"
    assert sol.max_violation < 1e-25
    assert abs(float(sol.objective) - np.linalg.eigvalsh(np.array(C, float))[0]) < 1e-15


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(precision=64)
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)


def test_infeasible_problem_is_not_optimal():
    p = SdpProblem("min")
    x = p.add_block("x", 1, DIAG)
    p.add_constraint("=", -1, [(x, 0, 0, 1)])
    p.set_objective([(x, 0, 0, 1)])
    assert solve(p).status in ("failed", "infeasible")


def test_recentre_gives_interior_point():
    C = [[2, 1], [1, 2]]
    p = _min_eig_problem(C)
    z = solve(p).objective
    rec = feasibility_recentre(p, z, F(1, 1000))
    assert rec.status == "feasible"
    assert min(rec.min_eigenvalues) > 1e-4
    assert float(rec.objective) <= float(z) + 1e-3 + 1e-9
    assert rec.max_violation < 1e-8


def test_recentre_fails_without_slack():
    # the optimum of min x s.t. x >= 0 is on the boundary: no room for eta = 0
    p = SdpProblem("min")
    x = p.add_block("x", 1, DIAG)
    p.add_constraint(">=", 0, [(x, 0, 0, 1)])
    p.set_objective([(x, 0, 0, 1)])
    with pytest.raises(RecentreError):
        feasibility_recentre(p, 0, 0)
