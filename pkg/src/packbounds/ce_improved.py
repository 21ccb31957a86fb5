"""Sphere packing bounds strengthened by tangency-graph degree bounds.

Single-size packings of balls of radius 1/2. Besides the usual conditions on
f (f^(0) >= vol B, f^ >= 0, f(x) <= 0 for |x| >= 1 + eps_m), f may be
positive on the shells 1 + eps_(k-1) <= |x| < 1 + eps_k as long as
f <= eta_k there. Upper bounds U(eps_k) on the average number of neighbours
within distance 1 + eps_k turn this into the bound

    max  f(0) + sum_k eta_k A_k   s.t.  A_1 + ... + A_k <= U(eps_k),  A >= 0,

whose LP dual  min f(0) + sum_k y_k U(eps_k)  s.t.  y_i + ... + y_m >= eta_i,
y >= 0  is merged with the SDP for f into one minimization.

f is built as in the binary sphere program: phi(t) = sum_k a_k t^(2k) is a
sum of squares (blocks S0, S1), f^(u) = phi(|u|) exp(-pi |u|^2) and
f(x) = q(|x|) exp(-pi |x|^2) with q = F^-1[phi]. Sign conditions on q are
imposed through interval sums of squares in z = w^2:

    -q(z)              = <P0, V> + (z - c_m^2) <Q0, V>          (z >= c_m^2)
    eta_k - E_k q(z)   = (z - a^2) <A_k, V> + (b^2 - z) <B_k, V>  (a^2 <= z <= b^2)

where [a, b] is the k-th shell and E_k is a rational upper bound for
exp(-pi a^2). When q >= 0 on the shell, f <= E_k q <= eta_k; when q < 0,
f < 0 <= eta_k.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, TextIO

import mpmath
import numpy as np
from scipy.optimize import linprog

from .euclidean_bounds import EVAL_DPS, sphere_tables
from .numerics import PiSum, ScaledRational, as_fraction, ball_volume, exp_enclosure, pi_enclosure, to_mpf
from .polynomials import Poly
from .sdp_model import DIAG, PSD, SdpProblem
from .solver import SolverConfig, solve

__all__ = [
    "TangencyTable",
    "CeInstance",
    "CeSolutionView",
    "t_of_eps",
    "load_table",
    "builtin_table",
    "BUILTIN_TABLES",
    "build_ce_sdp",
    "ce_solution_view",
    "center_density",
    "ce_bound",
    "write_results",
    "CE_CSV_HEADER",
]

COEF_BITS = 600

# (eps, U(eps)) pairs: upper bounds on spherical codes with angle arccos t(eps)
BUILTIN_TABLES = {
    3: [("0.022753", 12), ("0.054092", 13), ("0.082109", 14), ("0.113864", 15)],
    4: [("0.008097", 24), ("0.017446", 25), ("0.025978", 26), ("0.036951", 27)],
    5: [("0.003013", 45), ("0.008097", 46), ("0.013259", 47), ("0.017446", 48)],
    6: [("0.002006", 79), ("0.004024", 80), ("0.006054", 81), ("0.008097", 82)],
    7: [("0.001001", 136), ("0.002006", 137), ("0.003013", 138), ("0.004024", 139), ("0.005037", 140)],
    9: [("0.003013", 373), ("0.029233", 457), ("0.030325", 459), ("0.031421", 464), ("0.032520", 468), ("0.033622", 473)],
}


def _check_eps(eps: Fraction):
    if eps < 0 or (1 + eps) ** 2 >= 2:
        raise ValueError(f"eps = {eps} must satisfy 0 <= eps < sqrt(2) - 1")


def t_of_eps(eps) -> Fraction:
    """Largest cosine between two shell points at mutual distance >= 1."""
    eps = as_fraction(Fraction(str(eps)) if isinstance(eps, float) else eps)
    _check_eps(eps)
    return 1 - Fraction(1, 2) / (1 + eps) ** 2


@dataclass(frozen=True)
class TangencyTable:
    n: int
    rows: tuple  # ((eps_k, U_k), ...)

    def __post_init__(self):
        rows = tuple((as_fraction(Fraction(str(e)) if isinstance(e, (float, str)) else e), as_fraction(Fraction(str(u)) if isinstance(u, (float, str)) else u)) for e, u in self.rows)
        object.__setattr__(self, "rows", rows)
        prev_e, prev_u = Fraction(0), Fraction(0)
        for k, (e, u) in enumerate(rows):
            if e <= prev_e:
                raise ValueError(f"row {k + 1}: eps values must be positive and strictly increasing")
            if u < 0:
                raise ValueError(f"row {k + 1}: U must be nonnegative")
            if u < prev_u:
                raise ValueError(f"row {k + 1}: U must be nondecreasing")
            _check_eps(e)
            prev_e, prev_u = e, u

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def eps(self) -> list:
        return [e for e, _ in self.rows]

    @property
    def U(self) -> list:
        return [u for _, u in self.rows]

    def without(self, k: int) -> "TangencyTable":
        return TangencyTable(self.n, self.rows[:k] + self.rows[k + 1:])


def builtin_table(n: int) -> TangencyTable:
    if n not in BUILTIN_TABLES:
        raise KeyError(f"no built-in table for dimension {n} (available: {sorted(BUILTIN_TABLES)})")
    return TangencyTable(n, tuple(BUILTIN_TABLES[n]))


def load_table(reader: TextIO, n: int) -> TangencyTable:
    """Read an ``epsilon,U`` CSV (header required)."""
    rows = list(csv.reader(reader))
    if not rows or [c.strip() for c in rows[0]] != ["epsilon", "U"]:
        raise ValueError("table CSV must start with the header 'epsilon,U'")
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ValueError(f"line {ln}: expected two columns")
        try:
            out.append((Fraction(row[0].strip()), Fraction(row[1].strip())))
        except ValueError as exc:
            raise ValueError(f"line {ln}: {exc}") from exc
    return TangencyTable(n, tuple(out))


@dataclass(frozen=True)
class CeInstance:
    n: int
    table: TangencyTable
    d: int

    def __post_init__(self):
        if self.table.n != self.n:
            raise ValueError("table dimension does not match n")
        if self.d < 1 or self.d % 2 == 0:
            raise ValueError("d must be odd and >= 1")

    def describe(self) -> dict:
        return {
            "kind": "ce",
            "n": self.n,
            "d": self.d,
            "table": [[str(e), str(u)] for e, u in self.table.rows],
        }


def _sym_terms(block: int, coef, h: int, scale=1) -> list:
    """Terms of <X, C> for a symmetric C given as C[k][l], k, l = 0..h."""
    return [(block, k, l, coef[k][l] * scale) for k in range(h + 1) for l in range(k, h + 1) if coef[k][l] != 0]


def _exp_upper(a: Fraction, bits: int) -> Fraction:
    # rational upper bound for exp(-pi a^2)
    return exp_enclosure(-(pi_enclosure(bits + 16) * (a * a)), bits).hi


def build_ce_sdp(inst: CeInstance, bits: int = COEF_BITS) -> SdpProblem:
    n, d, h = inst.n, inst.d, inst.d // 2
    T = sphere_tables(n, d)
    m = inst.table.m
    eps = [Fraction(0)] + inst.table.eps
    p = SdpProblem("min")
    S0 = p.add_block("S0", h + 1, PSD)
    S1 = p.add_block("S1", h + 1, PSD)
    P0 = p.add_block("P0", h + 1, PSD)
    Q0 = p.add_block("Q0", h + 1, PSD)
    Ab = [p.add_block(f"A{k + 1}", h + 1, PSD) for k in range(m)]
    Bb = [p.add_block(f"B{k + 1}", h + 1, PSD) for k in range(m)]
    yb = p.add_block("y", m, DIAG) if m else None
    eb = p.add_block("eta", m, DIAG) if m else None
    layout = {"S0": S0, "S1": S1, "P0": P0, "Q0": Q0, "A": Ab, "B": Bb, "y": yb, "eta": eb, "tail": [], "shells": [], "dual": []}

    F0at0 = [[T.F0[k][l].coeff(0) for l in range(h + 1)] for k in range(h + 1)]
    F1at0 = [[T.F1[k][l].coeff(0) for l in range(h + 1)] for k in range(h + 1)]
    V0 = [[T.V[k][l].coeff(0) for l in range(h + 1)] for k in range(h + 1)]
    # f^(0) = phi(0) >= vol B(1/2)
    layout["vol"] = p.add_constraint(">=", ball_volume(n, Fraction(1, 2)), _sym_terms(S0, V0, h), "vol")

    def q_terms(mm: int, scale=1) -> list:
        c0 = [[T.A0[k][l][mm] for l in range(h + 1)] for k in range(h + 1)]
        c1 = [[T.A1[k][l][mm] for l in range(h + 1)] for k in range(h + 1)]
        return _sym_terms(S0, c0, h, scale) + _sym_terms(S1, c1, h, scale)

    def z_minus(block: int, c2: Fraction, mm: int, sign: int = 1) -> list:
        # sign * (z - c2) <X, V>, with z = x / (2 pi)
        out = []
        for k in range(h + 1):
            for l in range(k, h + 1):
                a = PiSum({-1: T.QX[k][l][mm], 0: -c2 * T.Q0[k][l][mm]}) * sign
                if not a.is_zero():
                    out.append((block, k, l, a))
        return out

    # tail: q + <P0, V> + (z - c_m^2) <Q0, V> = 0
    cm2 = (1 + eps[-1]) ** 2
    for mm in range(d + 1):
        terms = q_terms(mm) + _sym_terms(P0, [[T.Q0[k][l][mm] for l in range(h + 1)] for k in range(h + 1)], h)
        terms += z_minus(Q0, cm2, mm)
        layout["tail"].append(p.add_constraint("=", 0, terms, f"tail_{mm}"))
    # shells: E_k q - eta_k + (z - a^2) <A_k, V> + (b^2 - z) <B_k, V> = 0
    one = T.basis.to_basis_x(Poly([Fraction(1)]))
    E = []
    for k in range(m):
        a, b = 1 + eps[k], 1 + eps[k + 1]
        Ek = _exp_upper(a, bits)
        E.append(Ek)
        rows = []
        for mm in range(d + 1):
            terms = q_terms(mm, Ek) + z_minus(Ab[k], a * a, mm) + z_minus(Bb[k], b * b, mm, -1)
            if one[mm] != 0:
                terms.append((eb, k, k, -one[mm]))
            rows.append(p.add_constraint("=", 0, terms, f"shell{k + 1}_{mm}"))
        layout["shells"].append(rows)
    # LP dual: y_i + ... + y_m >= eta_i
    for i in range(m):
        terms = [(yb, j, j, Fraction(1)) for j in range(i, m)] + [(eb, i, i, Fraction(-1))]
        layout["dual"].append(p.add_constraint(">=", 0, terms, f"dual{i + 1}"))
    obj = _sym_terms(S0, F0at0, h) + _sym_terms(S1, F1at0, h)
    obj += [(yb, k, k, inst.table.U[k]) for k in range(m)]
    p.set_objective(obj)
    p.meta = {"instance": inst.describe(), "layout": layout, "coef_bits": bits, "tables": T, "E": E}
    return p


def center_density(n: int, density) -> float:
    """Density divided by the volume of the unit ball of R^n."""
    vol = ball_volume(n, 1)
    with mpmath.workdps(30):
        return float(to_mpf(density) / vol.to_mpf()) if not isinstance(density, float) else density / float(vol)


@dataclass
class CeSolutionView:
    """Solved program: phi and q as mpf polynomials in x = 2 pi t^2 (resp. 2 pi w^2)."""

    n: int
    phi_x: Poly
    q_x: Poly
    y: list
    eta: list
    eps: list
    U: list
    blocks: dict
    bound: float
    center: float
    status: str = "optimal"
    checks: dict = field(default_factory=dict)

    def q(self, w):
        with mpmath.workdps(EVAL_DPS):
            w = mpmath.mpf(w)
            return self.q_x(2 * mpmath.pi * w * w)

    def f(self, w):
        with mpmath.workdps(EVAL_DPS):
            w = mpmath.mpf(w)
            return self.q(w) * mpmath.exp(-mpmath.pi * w * w)

    def phi(self, t):
        with mpmath.workdps(EVAL_DPS):
            t = mpmath.mpf(t)
            return self.phi_x(2 * mpmath.pi * t * t)

    def a_coeffs(self) -> list:
        with mpmath.workdps(EVAL_DPS):
            return [c * (2 * mpmath.pi) ** k for k, c in enumerate(self.phi_x.coeffs)]

    def dual_slack(self) -> list:
        """y_i + ... + y_m - eta_i (nonnegative for a feasible point)."""
        m = len(self.y)
        return [sum(self.y[i:]) - self.eta[i] for i in range(m)]

    def lp_value(self) -> float:
        """Optimal value of the max-LP in A_k for the solved f(0) and eta (primal side)."""
        m = len(self.eta)
        f0 = float(self.q(0))
        if m == 0:
            return f0
        c = -np.array([float(e) for e in self.eta])
        A = np.tril(np.ones((m, m)))
        res = linprog(c, A_ub=A, b_ub=[float(u) for u in self.U], bounds=[(0, None)] * m, method="highs")
        return f0 - float(res.fun)


def _mp_matrix(M) -> list:
    return [[mpmath.mpf(float(x)) if isinstance(x, float) else mpmath.mpf(str(x)) for x in row] for row in M]


def ce_solution_view(p: SdpProblem, sol) -> CeSolutionView:
    with mpmath.workdps(EVAL_DPS):
        lay, T = p.meta["layout"], p.meta["tables"]
        inst = p.meta["instance"]
        h = inst["d"] // 2
        S0, S1 = _mp_matrix(sol.matrices[lay["S0"]]), _mp_matrix(sol.matrices[lay["S1"]])
        xpoly = Poly([Fraction(0), Fraction(1)])
        phi = Poly([mpmath.mpf(0)])
        q = Poly([mpmath.mpf(0)])
        for k in range(h + 1):
            for l in range(h + 1):
                phi = phi + T.V[k][l].map(lambda c, s=S0[k][l]: to_mpf(c) * s)
                phi = phi + (xpoly * T.V[k][l]).map(lambda c, s=S1[k][l]: to_mpf(c) * s)
                q = q + T.F0[k][l].map(lambda c, s=S0[k][l]: to_mpf(c) * s)
                q = q + T.F1[k][l].map(lambda c, s=S1[k][l]: to_mpf(c) * s)
        m = len(inst["table"])
        y = [mpmath.mpf(str(sol.matrices[lay["y"]][k][k])) for k in range(m)] if m else []
        eta = [mpmath.mpf(str(sol.matrices[lay["eta"]][k][k])) for k in range(m)] if m else []
        eps = [Fraction(e) for e, _ in inst["table"]]
        U = [Fraction(u) for _, u in inst["table"]]
        blocks = {b.name: sol.matrices[i] for i, b in enumerate(p.blocks)}
        bound = float(sol.objective)
        return CeSolutionView(inst["n"], phi, q, y, eta, eps, U, blocks, bound, center_density(inst["n"], bound), sol.status)


def ce_bound(inst: CeInstance, cfg: SolverConfig | None = None):
    """(density bound, center density, solution view)."""
    p = build_ce_sdp(inst)
    sol = solve(p, cfg or SolverConfig(113))
    view = ce_solution_view(p, sol)
    view.checks["lp_value"] = view.lp_value()
    view.checks["min_dual_slack"] = float(min(view.dual_slack())) if view.y else 0.0
    return view.bound, view.center, view


CE_CSV_HEADER = ["n", "d", "density_bound", "center_density", "status"]


def write_results(rows: Sequence, writer: TextIO) -> None:
    """rows: (n, d, density_bound, center_density, status)."""
    w = csv.writer(writer, lineterminator="\n")
    w.writerow(CE_CSV_HEADER)
    for n, d, b, c, st in rows:
        w.writerow([n, d, "" if b is None else f"{b:.12g}", "" if c is None else f"{c:.12g}", st])
