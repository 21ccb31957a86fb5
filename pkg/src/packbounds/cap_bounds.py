"""Density bounds for packings of spherical caps of several sizes.

The SDP asks for matrices (f_ij,k) defining f_ij(u) = sum_k f_ij,k P_k(u)
(P_k the normalized Jacobi polynomials of S^(n-1)) such that

* (f_ij,0) - sqrt(w_i w_j) is PSD,
* (f_ij,k) is PSD for k >= 1,
* -f_ij is a weighted sum of squares on [-1, cos(alpha_i + alpha_j)]:

      f_ij(u) + <Q_ij, v(u) v(u)^T> + (u + 1)(c_ij - u) <R_ij, v'(u) v'(u)^T> = 0

  with monomial vectors v = (1, ..., u^d) and v' = (1, ..., u^(d-1)).

The bound is max_i f_ii(1) = max_i sum_k f_ii,k, minimized through an
epigraph variable M.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, TextIO

import mpmath

from .numerics import (
    RationalInterval,
    ScaledRational,
    angle_enclosure,
    as_fraction,
    cos_enclosure,
    sqrt_enclosure,
    to_mpf,
)
from .polynomials import Poly, cap_weight, cap_weight_enclosure, jacobi, sturm_count
from .sdp_model import DIAG, PSD, SdpProblem
from .solver import SolverConfig, solve

__all__ = [
    "CapInstance",
    "CapSolutionView",
    "build_cap_sdp",
    "cap_bound",
    "cap_solution_view",
    "prism_density",
    "florian_cap_bound",
    "prism5_sharpness_certificate",
    "sweep_caps",
    "angle_value",
    "parse_angle",
]

COEF_BITS = 600


def angle_value(a):
    """An angle (float, Fraction, or ScaledRational q*pi) as an mpf."""
    if isinstance(a, ScaledRational):
        if a.k not in (0, 1):
            raise ValueError("angles must be rational or rational multiples of pi")
        return a.to_mpf()
    return to_mpf(as_fraction(a)) if isinstance(a, (Fraction, int)) else mpmath.mpf(a)


@dataclass(frozen=True)
class CapInstance:
    n: int
    alphas: tuple
    d: int

    def __init__(self, n: int, alphas: Sequence, d: int):
        alphas = tuple(alphas)
        if n < 2:
            raise ValueError("dimension must be >= 2")
        if not alphas:
            raise ValueError("need at least one cap angle")
        if d < 1:
            raise ValueError("d must be >= 1")
        for a in alphas:
            v = float(angle_value(a))
            if not (0 < v <= math.pi + 1e-15):
                raise ValueError(f"cap angle {a} outside (0, pi]")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "d", d)

    @property
    def N(self) -> int:
        return len(self.alphas)

    def describe(self) -> dict:
        return {"kind": "cap", "n": self.n, "d": self.d, "alphas": [_angle_str(a) for a in self.alphas]}


def _angle_str(a) -> str:
    if isinstance(a, ScaledRational):
        return f"{a.q}*pi" if a.k == 1 else str(a.q)
    if isinstance(a, Fraction):
        return str(a)
    return repr(float(a))


def parse_angle(s: str):
    """Parse 'pi/5', '3*pi/10', '0.2*pi', '3/7' or '0.6283' into an angle."""
    s = s.strip().replace(" ", "").replace("*", "")
    try:
        if "pi" in s:
            left, right = s.split("pi", 1)
            q = Fraction(left) if left else Fraction(1)
            if right:
                if not right.startswith("/"):
                    raise ValueError
                q /= Fraction(right[1:])
            return ScaledRational(q, 1)
        return Fraction(s) if "/" in s else float(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse angle {s!r}") from exc


def _pair_sum_enclosure(a, b, bits: int) -> RationalInterval:
    if isinstance(a, ScaledRational) and isinstance(b, ScaledRational) and a.k == b.k:
        return angle_enclosure(a + b, bits)
    return angle_enclosure(a, bits) + angle_enclosure(b, bits)


def _pair_sum_vs_pi(a, b) -> int:
    """Sign of (a + b - pi); exact for rational multiples of pi."""
    if isinstance(a, ScaledRational) and isinstance(b, ScaledRational) and a.k == b.k == 1:
        t = a.q + b.q - 1
        return (t > 0) - (t < 0)
    with mpmath.workprec(200):
        t = angle_value(a) + angle_value(b) - mpmath.pi
        return int(t > 0) - int(t < 0)


def build_cap_sdp(inst: CapInstance, bits: int = COEF_BITS) -> SdpProblem:
    """Problem A as an SdpProblem (min M)."""
    n, N, d = inst.n, inst.N, inst.d
    p = SdpProblem("min")
    Fb = [p.add_block(f"F{k}", N, PSD) for k in range(2 * d + 1)]
    G = p.add_block("G", N, PSD)
    M = p.add_block("M", 1, DIAG)
    w = [cap_weight_enclosure(n, a, bits) for a in inst.alphas]
    P = [jacobi(n, k) for k in range(2 * d + 1)]
    layout = {"F": Fb, "G": G, "M": M, "Q": {}, "R": {}, "pairs": {}, "link": {}, "epi": []}
    # shift block: G_ij = F0_ij - sqrt(w_i w_j)
    for i in range(N):
        for j in range(i, N):
            s = sqrt_enclosure(w[i] * w[j], bits) if i != j else w[i]
            h = Fraction(1) if i == j else Fraction(1, 2)
            k = p.add_constraint("=", s, [(Fb[0], i, j, h), (G, i, j, -h)], f"link{i}{j}")
            layout["link"][(i, j)] = k
    # epigraph: sum_k F_k[i,i] <= M
    for i in range(N):
        terms = [(Fb[k], i, i, Fraction(1)) for k in range(2 * d + 1)] + [(M, 0, 0, Fraction(-1))]
        layout["epi"].append(p.add_constraint("<=", 0, terms, f"epi{i}"))
    for i in range(N):
        for j in range(i, N):
            rel = _pair_sum_vs_pi(inst.alphas[i], inst.alphas[j])
            if rel > 0:
                # two such caps cannot be placed with disjoint interiors
                continue
            half = Fraction(1) if i == j else Fraction(1, 2)
            if rel == 0:
                # caps touch only antipodally: the forbidden set is u = -1
                terms = [(Fb[k], i, j, half * P[k](Fraction(-1))) for k in range(2 * d + 1)]
                layout["pairs"][(i, j)] = [p.add_constraint("<=", 0, terms, f"antipodal{i}{j}")]
                continue
            c = cos_enclosure(_pair_sum_enclosure(inst.alphas[i], inst.alphas[j], bits), bits)
            Q = p.add_block(f"Q{i}{j}", d + 1, PSD)
            R = p.add_block(f"R{i}{j}", d, PSD)
            layout["Q"][(i, j)] = Q
            layout["R"][(i, j)] = R
            rows = []
            for m in range(2 * d + 1):
                terms = [(Fb[k], i, j, half * P[k].coeff(m)) for k in range(2 * d + 1) if P[k].coeff(m) != 0]
                for a in range(d + 1):
                    b = m - a
                    if a <= b <= d:
                        terms.append((Q, a, b, Fraction(1)))
                # (u+1)(c-u) = c + (c-1) u - u^2
                for shift, coef in ((0, c), (1, c - 1), (2, Fraction(-1))):
                    s = m - shift
                    for a in range(d):
                        b = s - a
                        if a <= b <= d - 1:
                            terms.append((R, a, b, coef))
                rows.append(p.add_constraint("=", 0, terms, f"id{i}{j}_{m}"))
            layout["pairs"][(i, j)] = rows
    p.set_objective([(M, 0, 0, Fraction(1))])
    p.meta = {"instance": inst.describe(), "layout": layout, "coef_bits": bits, "weights": w}
    return p


@dataclass
class CapSolutionView:
    f: list  # f[k] is an N x N matrix (mpf entries)
    Q: dict
    R: dict
    bound: object
    status: str = "optimal"
    checks: dict = field(default_factory=dict)

    def f_poly(self, n: int, i: int, j: int) -> Poly:
        """f_ij in the monomial basis (mpf coefficients)."""
        out = Poly([mpmath.mpf(0)])
        for k, Fk in enumerate(self.f):
            out = out + jacobi(n, k).map(lambda c, v=Fk[i][j]: to_mpf(c) * v)
        return out


def cap_solution_view(p: SdpProblem, sol) -> CapSolutionView:
    lay = p.meta["layout"]
    conv = lambda M: [[mpmath.mpf(float(x)) if isinstance(x, float) else mpmath.mpf(str(x)) for x in row] for row in M]
    f = [conv(sol.matrices[b]) for b in lay["F"]]
    Q = {k: conv(sol.matrices[b]) for k, b in lay["Q"].items()}
    R = {k: conv(sol.matrices[b]) for k, b in lay["R"].items()}
    return CapSolutionView(f, Q, R, sol.objective, sol.status)


def cap_bound(inst: CapInstance, cfg: SolverConfig | None = None):
    """(bound, status, solution view). A 'feasible' status is still a valid bound."""
    p = build_cap_sdp(inst)
    sol = solve(p, cfg or SolverConfig())
    view = cap_solution_view(p, sol)
    return float(sol.objective), sol.status, view


# ---------------------------------------------------------------------------
# Geometry on S^2
# ---------------------------------------------------------------------------


def prism_density(k: int):
    """(alpha_small, alpha_big, density) for the caps inscribed in a k-prism's faces."""
    if k < 3:
        raise ValueError("k must be >= 3")
    with mpmath.workdps(40):
        a1 = mpmath.pi / k
        a2 = mpmath.pi / 2 - mpmath.pi / k
        dens = k * cap_weight(3, a1) + 2 * cap_weight(3, a2)
        return float(a1), float(a2), float(dens)


def _vertex_angle(a, b, c):
    # angle opposite side a in a spherical triangle with sides a, b, c
    return mpmath.acos((mpmath.cos(a) - mpmath.cos(b) * mpmath.cos(c)) / (mpmath.sin(b) * mpmath.sin(c)))


def _florian_D(ai, aj, ak):
    # triangle on the cap centres: sides ai+aj, aj+ak, ai+ak; vertex A at cap i
    A = _vertex_angle(aj + ak, ai + aj, ai + ak)
    B = _vertex_angle(ai + ak, ai + aj, aj + ak)
    C = _vertex_angle(ai + aj, ai + ak, aj + ak)
    excess = A + B + C - mpmath.pi
    if not excess > 0:
        raise ValueError("degenerate triangle")
    covered = A * (1 - mpmath.cos(ai)) + B * (1 - mpmath.cos(aj)) + C * (1 - mpmath.cos(ak))
    return covered / excess


def florian_cap_bound(alphas: Sequence) -> float:
    """Florian's bound for cap packings on S^2: the densest triangle of mutually touching caps.

    D = [A(1 - cos a_i) + B(1 - cos a_j) + C(1 - cos a_k)] / (A + B + C - pi),
    the area of the three cap sectors over the spherical-excess area.
    """
    with mpmath.workdps(30):
        vals = [angle_value(a) for a in alphas]
        if any(v > mpmath.pi / 3 + mpmath.mpf(10) ** -25 for v in vals):
            raise ValueError("Florian's bound needs angles <= pi/3")
        best = max(_florian_D(*t) for t in itertools.combinations_with_replacement(vals, 3))
        return float(best)


def prism5_sharpness_certificate(dps: int = 60, tol: float = 1e-40) -> CapSolutionView:
    """Degree-4 certificate that the 5-prism cap packing is optimal.

    Solves the linear system given by complementary slackness with the
    5-prism configuration, picks the middle of the one-parameter family's
    feasible window, and checks every condition of the theorem: eigenvalues
    of the coefficient matrices and signs on the forbidden intervals (Sturm
    counts on f_ij - tol with rational coefficients).

    The slackness conditions used are f11(cos 2pi/5) = f11(cos 4pi/5) =
    f11'(cos 4pi/5) = f12(0) = f22(-1) = 0 plus the pinning f11(-1) =
    f12(-19/20) = f12'(-19/20) = 0. The printed derivative condition at
    cos 2pi/5 and the cos(2pi/4) entry of the k >= 1 product matrices make
    the system infeasible; cos 4pi/5 is what the 5-prism geometry gives.
    """
    with mpmath.workdps(dps):
        pi = mpmath.pi
        a1, a2 = ScaledRational(Fraction(1, 5), 1), ScaledRational(Fraction(3, 10), 1)
        w1, w2 = cap_weight(3, a1), cap_weight(3, a2)
        sw = mpmath.sqrt(w1 * w2)
        P = [jacobi(3, k).to_mpf() for k in range(5)]
        dP = [jacobi(3, k).derivative().to_mpf() for k in range(5)]
        pairs = ("11", "12", "22")
        idx = lambda ij, k: pairs.index(ij) * 5 + k
        c2, c4 = mpmath.cos(2 * pi / 5), mpmath.cos(4 * pi / 5)
        rows, rhs = [], []
        point_conditions = [
            ("11", c2, P), ("11", c4, P), ("11", c4, dP), ("12", mpmath.mpf(0), P), ("22", mpmath.mpf(-1), P),
            ("11", mpmath.mpf(-1), P), ("12", mpmath.mpf(-19) / 20, P), ("12", mpmath.mpf(-19) / 20, dP),
        ]
        for ij, u, fam in point_conditions:
            r = [mpmath.mpf(0)] * 15
            for k in range(5):
                r[idx(ij, k)] = fam[k](u)
            rows.append(r)
            rhs.append(mpmath.mpf(0))
        names = [["11", "12"], ["12", "22"]]
        for k in range(5):
            if k == 0:
                W = [[25 * w1, 10 * sw], [10 * sw, 4 * w2]]
                T = [[25 * w1**2 + 10 * w1 * w2, sw * (10 * w1 + 4 * w2)],
                     [sw * (25 * w1 + 10 * w2), 10 * w1 * w2 + 4 * w2**2]]
            else:
                W = [[w1 * (5 * P[k](1) + 10 * P[k](c2) + 10 * P[k](c4)), sw * 10 * P[k](0)],
                     [sw * 10 * P[k](0), w2 * (2 * P[k](1) + 2 * P[k](-1))]]
                T = [[0, 0], [0, 0]]
            for r_ in range(2):
                for c_ in range(2):
                    row = [mpmath.mpf(0)] * 15
                    row[idx(names[r_][0], k)] += W[0][c_]
                    row[idx(names[r_][1], k)] += W[1][c_]
                    rows.append(row)
                    rhs.append(mpmath.mpf(T[r_][c_]))
        A, b = mpmath.matrix(rows), mpmath.matrix(rhs)
        U, S, V = mpmath.svd_r(A)
        cutoff = max(S) * mpmath.mpf(10) ** (-dps // 2)
        rank = sum(1 for s in S if s > cutoff)
        x0 = V.T * mpmath.diag([1 / s if s > cutoff else 0 for s in S]) * U.T * b
        nullity = 15 - rank
        resid = mpmath.norm(A * x0 - b)
        checks = {"rank": rank, "nullity": nullity, "residual": float(resid)}
        if nullity != 1 or resid > mpmath.mpf(10) ** (-dps // 2):
            raise ValueError(f"linear system is not a consistent one-parameter family: {checks}")
        nv = V.T[:, 14]
        scale = mpmath.norm(x0)

        def point(t):
            return x0 + t * scale * nv

        def mats(x):
            return [mpmath.matrix([[x[idx("11", k)], x[idx("12", k)]], [x[idx("12", k)], x[idx("22", k)]]]) for k in range(5)]

        def margin(t):
            F = mats(point(t))
            return min(min(mpmath.eigsy(F[1])[0]), min(mpmath.eigsy(F[3])[0]))

        # the PSD conditions on k = 1, 3 cut out the feasible window; locate it
        grid = [mpmath.mpf(i) / 500 for i in range(-1500, 1501)]
        vals = [margin(t) for t in grid]
        inside = [t for t, v in zip(grid, vals) if v > 0]
        if not inside:
            raise ValueError("no parameter value gives PSD coefficient matrices")
        t_in = inside[len(inside) // 2]

        def edge(lo, hi):
            # margin(lo) > 0 >= margin(hi) or the reverse; bisect to the sign change
            pos_lo = margin(lo) > 0
            for _ in range(80):
                mid = (lo + hi) / 2
                if (margin(mid) > 0) == pos_lo:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2

        step = mpmath.mpf(1) / 500
        left, right = t_in, t_in
        while margin(left - step) > 0:
            left -= step
        while margin(right + step) > 0:
            right += step
        t_lo, t_hi = edge(left - step, left), edge(right, right + step)
        t_star = (t_lo + t_hi) / 2
        x = point(t_star)
        F = mats(x)
        checks["window"] = (float(t_lo), float(t_hi))
        eig = [float(min(mpmath.eigsy(Fk)[0])) for Fk in F[1:]]
        G = F[0] - mpmath.matrix([[w1, sw], [sw, w2]])
        eigG = float(min(mpmath.eigsy(G)[0]))
        checks["min_eig_k>=1"] = eig
        checks["min_eig_shift"] = eigG
        ok = all(e >= -tol for e in eig) and eigG >= -tol
        f = [[[F[k][i, j] for j in range(2)] for i in range(2)] for k in range(5)]
        view = CapSolutionView(f, {}, {}, None)

        def fpoly(i, j):
            return view.f_poly(3, i, j)

        # sign conditions: f_ij - tol < 0 on [-1, cos(alpha_i + alpha_j)]
        ends = {(0, 0): cos_enclosure(angle_enclosure(ScaledRational(Fraction(2, 5), 1), 300), 300).hi,
                (0, 1): Fraction(0),
                (1, 1): cos_enclosure(angle_enclosure(ScaledRational(Fraction(3, 5), 1), 300), 300).hi}
        signs = {}
        for (i, j), b_end in ends.items():
            g = fpoly(i, j).map(lambda c: as_fraction(c)) - Poly([as_fraction(mpmath.mpf(tol))])
            roots = sturm_count(g, Fraction(-1), b_end)
            signs[f"f{i + 1}{j + 1}"] = roots == 0 and g(Fraction(-1)) < 0
        checks["nonpositive_on_forbidden"] = signs
        ok = ok and all(signs.values())
        checks["f11(cos 2pi/5)"] = float(fpoly(0, 0)(c2))
        bound = fpoly(0, 0)(mpmath.mpf(1))
        checks["f11(1)"] = bound
        checks["f22(1)"] = fpoly(1, 1)(mpmath.mpf(1))
        checks["target"] = 5 * w1 + 2 * w2
        ok = ok and abs(bound - checks["target"]) < mpmath.mpf(10) ** (-dps // 2) and checks["f22(1)"] <= bound + tol
        view.bound = bound
        view.status = "certified" if ok else "failed"
        view.checks = checks
        return view


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

CAP_CSV_HEADER = ["alpha1", "alpha2", "sdp_bound", "geometric_bound", "status"]


def _g12(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _cap_point(args):
    n, a1, a2, d, precision = args
    geo = None
    if n == 3 and max(a1, a2) <= math.pi / 3 + 1e-15:
        try:
            geo = florian_cap_bound([a1, a2])
        except ValueError:
            geo = None
    try:
        b, status, _ = cap_bound(CapInstance(n, (a1, a2), d), SolverConfig(precision))
    except Exception as exc:  # noqa: BLE001 - a failing grid point must not stop the sweep
        return (a1, a2, None, geo, f"error: {type(exc).__name__}")
    return (a1, a2, b, geo, status)


def sweep_caps(n: int, grid: Sequence, d: int, cfg: SolverConfig | None, writer: TextIO, jobs: int = 1) -> list:
    """Solve the N=2 program on a grid of (alpha1, alpha2) pairs and write CSV rows."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    cfg = cfg or SolverConfig()
    args = [(n, float(a1), float(a2), d, cfg.precision) for a1, a2 in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_cap_point, args))
    else:
        rows = [_cap_point(a) for a in args]
    w = csv.writer(writer, lineterminator="\n")
    w.writerow(CAP_CSV_HEADER)
    for a1, a2, b, geo, st in rows:
        w.writerow([_g12(a1), _g12(a2), _g12(b), _g12(geo), st])
    return rows
