import io
import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from packbounds.sdp_model import (
    DIAG,
    PSD,
    SdpaParseError,
    SdpProblem,
    WeightedGraph,
    alpha_bruteforce,
    evaluate_solution,
    export_sdpa,
    import_sdpa,
    import_solution,
    theta_prime_sdp,
    to_standard_form,
)
from packbounds.sdp_model import write_sdpa_solution
from packbounds.solver import SolverConfig, solve

F = Fraction


def _naive_alpha(g: WeightedGraph) -> Fraction:
    best = F(0)
    for mask in range(1 << g.n):
        vs = [v for v in range(g.n) if mask >> v & 1]
        if all(not g.adjacent(u, v) for u, v in itertools.combinations(vs, 2)):
            best = max(best, sum((g.weights[v] for v in vs), F(0)))
    return best


graphs = st.integers(2, 7).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]), max_size=12),
        st.lists(st.integers(1, 5), min_size=n, max_size=n),
    )
)


@settings(max_examples=40, deadline=None)
@given(graphs)
def test_alpha_bruteforce_matches_enumeration(data):
    n, edges, w = data
    g = WeightedGraph(n, edges, [F(x) for x in w])
    assert alpha_bruteforce(g) == _naive_alpha(g)


@settings(max_examples=12, deadline=None)
@given(graphs)
def test_theta_prime_is_an_upper_bound(data):
    n, edges, w = data
    g = WeightedGraph(n, edges, [F(x) for x in w])
    sol = solve(theta_prime_sdp(g))
    assert sol.status in ("optimal", "feasible")
    assert float(sol.objective) >= float(alpha_bruteforce(g)) - 1e-6


def test_theta_of_five_cycle():
    sol = solve(theta_prime_sdp(WeightedGraph.cycle(5)))
    assert sol.status == "optimal"
    assert abs(float(sol.objective) - math.sqrt(5)) < 1e-6


def test_theta_of_complete_and_empty_graphs():
    assert abs(float(solve(theta_prime_sdp(WeightedGraph.complete(5))).objective) - 1) < 1e-6
    g = WeightedGraph(4, [], [F(1), F(2), F(3), F(1, 2)])
    assert abs(float(solve(theta_prime_sdp(g)).objective) - 6.5) < 1e-6
    assert alpha_bruteforce(g) == F(13, 2)


def test_graph_validation():
    with pytest.raises(ValueError):
        WeightedGraph(3, [(0, 0)])
    with pytest.raises((ValueError, IndexError)):
        WeightedGraph(3, [(0, 5)])


def test_problem_validation():
    p = SdpProblem("min")
    b = p.add_block("X", 2)
    d = p.add_block("D", 2, DIAG)
    with pytest.raises(ValueError):
        p.add_block("X", 3)
    with pytest.raises(IndexError):
        p.add_constraint("=", 1, [(b, 0, 2, 1)])
    with pytest.raises(IndexError):
        p.add_constraint("=", 1, [(d, 0, 1, 1)])
    with pytest.raises(ValueError):
        p.add_constraint("<", 1, [(b, 0, 0, 1)])
    # repeated terms merge and cancel
    k = p.add_constraint("=", 1, [(b, 1, 0, 1), (b, 0, 1, -1), (b, 0, 0, 2)])
    assert p.constraints[k].terms == [(b, 0, 0, 2)]


def test_standard_form_slacks():
    p = SdpProblem("max")
    x = p.add_block("x", 2, DIAG)
    p.add_constraint("<=", 1, [(x, 0, 0, 1)])
    p.add_constraint(">=", 0, [(x, 1, 1, 1)])
    p.add_constraint("=", 3, [(x, 0, 0, 1), (x, 1, 1, 1)])
    p.set_objective([(x, 0, 0, 1)])
    sf = to_standard_form(p)
    assert len(sf.blocks) == 2 and sf.blocks[1].size == 2 and sf.sign == -1
    assert (1, 0, 0, F(1)) in sf.A[0] and (1, 1, 1, F(-1)) in sf.A[1]
    sol = solve(p)
    assert abs(float(sol.objective) - 1) < 1e-6


def test_sdpa_round_trip_preserves_optimum():
    g = WeightedGraph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)], [F(k + 1) for k in range(6)])
    p = theta_prime_sdp(g)
    buf = io.StringIO()
    export_sdpa(p, buf)
    q = import_sdpa(io.StringIO(buf.getvalue()))
    assert [b.size for b in q.blocks] == [b.size for b in to_standard_form(p).blocks]
    a, b = solve(p), solve(q)
    assert abs(float(a.objective) - float(b.objective)) < 1e-6


def test_sdpa_parse_errors_name_the_line():
    good = "1\n1\n2\n1.0\n0 1 1 1 1.0\n1 1 1 1 1.0\n"
    import_sdpa(io.StringIO(good))
    with pytest.raises(SdpaParseError) as e:
        import_sdpa(io.StringIO(good.replace("1 1 1 1 1.0", "1 1 3 1 1.0")))
    assert e.value.line == 6
    with pytest.raises(SdpaParseError) as e:
        import_sdpa(io.StringIO("1\n1\n2\n1.0 2.0\n"))
    assert e.value.line == 4
    with pytest.raises(SdpaParseError):
        import_sdpa(io.StringIO("1\n1\n"))
    with pytest.raises(SdpaParseError) as e:
        import_sdpa(io.StringIO(good.replace("0 1 1 1 1.0", "0 1 1 1 x")))
    assert e.value.line == 5


@pytest.mark.parametrize("precision", [53, 113])
def test_solution_file_round_trip(precision):
    p = theta_prime_sdp(WeightedGraph.cycle(5))
    sol = solve(p, SolverConfig(precision))
    buf = io.StringIO()
    write_sdpa_solution(buf, p, sol)
    back = import_solution(io.StringIO(buf.getvalue()), p, precision)
    assert back.status == "optimal"
    for M, N in zip(sol.matrices, back.matrices):
        assert np.max(np.abs(np.array(M, dtype=float) - np.array(N, dtype=float))) < 1e-14
    obj, viol, _ = evaluate_solution(p, back.matrices)
    assert abs(float(obj) - math.sqrt(5)) < 1e-6
    if precision == 113:
        assert viol < 1e-25


def test_import_solution_errors():
    p = theta_prime_sdp(WeightedGraph.cycle(5))
    with pytest.raises(SdpaParseError):
        import_solution(io.StringIO("phase.value = pdOPT\n"), p)
    with pytest.raises((SdpaParseError, ValueError)):
        import_solution(io.StringIO("phase.value = pdOPT\nyMat = {\n{ {1, 2} }\n}\n"), p)
