import copy
import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from packbounds.cap_bounds import CapInstance, build_cap_sdp
from packbounds.ce_improved import CeInstance, TangencyTable, build_ce_sdp
from packbounds.euclidean_bounds import SphereInstance, build_sphere_sdp
from packbounds.numerics import RationalInterval, ScaledRational
from packbounds.sdp_model import DIAG, SdpProblem, SdpSolution, evaluate_solution
from packbounds.solver import SolverConfig, solve
from packbounds.verify import (
    Certificate,
    Draft,
    VerificationError,
    certify,
    certify_instance,
    check,
    project_affine,
    rational_round_psd,
    reconstruct,
    redistribute,
    triangular_inverse_norm_bound,
)

F = Fraction
CAP = CapInstance(3, (ScaledRational(F(1, 5), 1), ScaledRational(F(3, 10), 1)), 2)
SPHERE = SphereInstance(2, (F(1, 2), F(1)), 3)


@pytest.fixture(scope="module")
def cap_cert():
    return certify_instance(CAP, eta=F(1, 10**7), precision=113)


@pytest.fixture(scope="module")
def sphere_cert():
    return certify_instance(SPHERE, eta=F(1, 10**5), precision=113)


def _draft(cert):
    return Draft(cert.instance["kind"], cert.instance, cert.factors, dict(cert.lam, **cert.mu), cert.pi_bits)


# -- project_affine -----------------------------------------------------------


def _trace_problem():
    p = SdpProblem("min")
    X = p.add_block("X", 2)
    p.add_constraint("=", 1, [(X, 0, 0, 1), (X, 1, 1, 1)])
    p.add_constraint("=", F(1, 4), [(X, 0, 1, 1)])
    p.set_objective([(X, 0, 0, 1)])
    return p


def test_projection_fixes_feasible_points():
    p = _trace_problem()
    X = np.array([[0.5, 0.125], [0.125, 0.5]])
    obj, viol, eigs = evaluate_solution(p, [X])
    sol = SdpSolution([X], obj, "feasible", viol, eigs)
    out = project_affine(sol, p, 113)
    assert out.max_violation == 0
    assert np.allclose(np.array(out.matrices[0], dtype=float), X, atol=0)


def test_projection_of_random_perturbation():
    p = _trace_problem()
    rng = np.random.default_rng(1)
    E = rng.normal(size=(2, 2)) * 1e-3
    X = np.array([[0.5, 0.125], [0.125, 0.5]]) + (E + E.T)
    sol = SdpSolution([X], 0.0, "feasible")
    out = project_affine(sol, p, 256)
    assert out.max_violation < 1e-70


def test_projection_at_256_bits():
    p = build_sphere_sdp(SPHERE)
    sol = solve(p, SolverConfig(113))
    assert 0 < sol.max_violation < 1e-25
    out = project_affine(sol, p, 256)
    assert out.max_violation <= 1e-60
    assert max(abs(a - b) for a, b in zip(sol.min_eigenvalues, out.min_eigenvalues)) < 1e-20


def test_projection_reports_rank_deficiency():
    p = _trace_problem()
    X = p.block_index("X")
    p.add_constraint("=", 2, [(X, 0, 0, 2), (X, 1, 1, 2)])
    sol = SdpSolution([np.eye(2) / 2], 0.0, "feasible")
    with pytest.raises(VerificationError, match="rank deficient"):
        project_affine(sol, p, 113)


# -- rational_round_psd ---------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3, 6])
def test_round_two_identity(n):
    L, lam = rational_round_psd(2 * np.eye(n), 113)
    assert 1 <= lam <= 2
    A = reconstruct(L, lam)
    for i in range(n):
        for j in range(n):
            assert abs(A[i][j] - (2 if i == j else 0)) < F(1, 10**30)


def test_round_diagonal():
    L, lam = rational_round_psd(np.diag([1.0, 4.0]), 113)
    assert F(1, 2) <= lam <= 1
    assert all(L[i][j] == 0 for i in range(2) for j in range(i + 1, 2))


def test_reconstruction_gap():
    rng = np.random.default_rng(7)
    B = rng.normal(size=(5, 5))
    A = B @ B.T + np.eye(5)
    L, lam = rational_round_psd(A, 256, round_bits=150)
    Ab = reconstruct(L, lam)
    gap = max(abs(Ab[i][j] - F(A[i, j])) for i in range(5) for j in range(5))
    assert gap <= F(1, 10**40)
    assert lam > 0


def test_round_rejects_indefinite():
    with pytest.raises(VerificationError):
        rational_round_psd(np.diag([1.0, -1e-3]), 113)


def test_reconstruct_rejects_upper_entries():
    with pytest.raises(VerificationError):
        reconstruct([[F(1), F(1)], [F(0), F(1)]], F(1))


# -- triangular_inverse_norm_bound ---------------------------------------------


def _exact_inverse_norm(U):
    n = len(U)
    M = [[F(x) for x in row] for row in U]
    inv = [[F(0)] * n for _ in range(n)]
    for c in range(n):
        for i in range(n - 1, -1, -1):
            s = (1 if i == c else 0) - sum(M[i][k] * inv[k][c] for k in range(i + 1, n))
            inv[i][c] = s / M[i][i]
    return max(sum(abs(x) for x in row) for row in inv)


def test_higham_identity_and_two_by_two():
    assert triangular_inverse_norm_bound([[F(1), 0], [0, F(1)]]) == 1
    assert triangular_inverse_norm_bound([[F(1), F(1)], [F(0), F(1)]]) >= 2
    assert triangular_inverse_norm_bound([[F(1), F(0)], [F(-1), F(1)]]) >= 2


def test_higham_never_under_reports_on_random_matrices():
    rng = random.Random(3)
    for _ in range(100):
        n = 10
        U = [[F(0)] * n for _ in range(n)]
        for i in range(n):
            U[i][i] = F(rng.choice([-1, 1]) * rng.randint(1, 9), rng.randint(1, 5))
            for j in range(i + 1, n):
                U[i][j] = F(rng.randint(-9, 9), rng.randint(1, 9))
        assert triangular_inverse_norm_bound(U) >= _exact_inverse_norm(U)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_higham_property(n, seed):
    rng = random.Random(seed)
    U = [[F(rng.randint(-5, 5), rng.randint(1, 4)) if j > i else F(0) for j in range(n)] for i in range(n)]
    for i in range(n):
        U[i][i] = F(rng.choice([-3, -1, 1, 2]))
    assert triangular_inverse_norm_bound(U) >= _exact_inverse_norm(U)


def test_higham_with_intervals_and_errors():
    U = [[RationalInterval(F(1), F(2)), RationalInterval(F(-1), F(1))], [0, RationalInterval(F(1), F(1))]]
    assert triangular_inverse_norm_bound(U) >= _exact_inverse_norm([[1, 1], [0, 1]])
    with pytest.raises(ZeroDivisionError):
        triangular_inverse_norm_bound([[F(0), F(1)], [F(0), F(1)]])
    with pytest.raises(ValueError):
        triangular_inverse_norm_bound([[F(1), F(1)], [F(1), F(1)]])


# -- redistribute and certificates ----------------------------------------------


def test_zero_residuals_keep_the_certificate(sphere_cert):
    dr = _draft(sphere_cert)
    zero = {pr: [RationalInterval.point(0)] * (SPHERE.d + 1) for pr in ((0, 0), (1, 1), (0, 1))}
    out = redistribute(dr, zero)
    assert out.certified
    assert all(a == 0 for a in out.alpha_bounds.values())
    # the rational matrices are unchanged, so the bound only loses the residual slack
    assert out.bound.lo <= sphere_cert.bound.hi
    assert sphere_cert.bound.lo - out.bound.hi <= 2 * max(sphere_cert.alpha_bounds.values())


def test_threshold_of_the_cap_criterion(cap_cert):
    dr = _draft(cap_cert)
    d = CAP.d
    mu = cap_cert.mu["Q00"]
    thr = mu / (2 * d + 1)
    zero = [RationalInterval.point(0)] * (2 * d + 1)

    def run(s):
        res = {(0, 0): [RationalInterval.point(s)] + zero[1:], (0, 1): zero, (1, 1): zero}
        return redistribute(dr, res)

    assert run(thr * F(99, 100)).certified
    bad = run(thr * F(101, 100))
    assert not bad.certified and "Q00" in bad.verdict


def test_sphere_certificate_and_replay(sphere_cert):
    assert sphere_cert.certified
    assert abs(float(sphere_cert.bound.hi) - sphere_cert.float_bound) < 1e-4
    assert float(sphere_cert.bound.hi) >= sphere_cert.float_bound - 1e-9
    res = check(json.loads(json.dumps(sphere_cert.to_json())))
    assert res.ok, res.failures
    assert res.bound == sphere_cert.bound


def test_cap_certificate_and_replay(cap_cert):
    assert cap_cert.certified
    assert 0.889672 - 1e-6 <= float(cap_cert.bound.lo) <= float(cap_cert.bound.hi) <= 0.889673
    assert check(cap_cert.to_json()).ok


def test_replay_is_deterministic(cap_cert):
    a, b = check(cap_cert.to_json()), check(cap_cert.to_json())
    assert a.ok == b.ok and a.bound == b.bound and a.failures == b.failures


def test_tampered_matrix_is_rejected(sphere_cert):
    js = sphere_cert.to_json()
    L = js["matrices"]["S0"]
    L[2][1] = str(F(L[2][1]) + F(1, 1000))
    res = check(js)
    assert not res.ok
    assert any("fingerprint" in f for f in res.failures)


def test_tampered_matrix_with_fresh_fingerprint_is_rejected(sphere_cert):
    cert = Certificate.from_json(sphere_cert.to_json())
    cert.factors = copy.deepcopy(cert.factors)
    cert.factors["Q12"][1][0] += F(1, 1000)
    res = check(cert.to_json())
    assert not res.ok
    assert any("verdict" in f or "differ" in f for f in res.failures)


def test_tampered_bound_and_verdict_are_rejected(cap_cert):
    js = cap_cert.to_json()
    js["bound"]["hi"] = "1/2"
    assert not check(js).ok
    js = cap_cert.to_json()
    js["lambda"]["G"] = "1"
    assert not check(js).ok
    assert not check({"instance": {}}).ok


def test_certificate_file_round_trip(tmp_path, cap_cert):
    path = tmp_path / "c.json"
    cap_cert.dump(path)
    back = Certificate.load(path)
    assert back.fingerprint() == cap_cert.fingerprint()
    assert back.bound == cap_cert.bound and back.verdict == cap_cert.verdict
    text = path.read_text()
    assert '"verdict": "certified"' in text


def test_unsupported_program_kind():
    p = build_ce_sdp(CeInstance(3, TangencyTable(3, ()), 3))
    sol = solve(p, SolverConfig(53))
    with pytest.raises(VerificationError, match="not supported"):
        certify(None, sol, p, 113)


def test_boundary_solution_needs_recentre():
    p = build_cap_sdp(CAP)
    sol = solve(p, SolverConfig(113))
    with pytest.raises(VerificationError):
        certify(CAP, sol, p, 113)
