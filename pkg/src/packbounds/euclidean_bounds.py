"""Density bounds for binary sphere packings in R^n.

The unknown is an even 2x2 matrix polynomial phi(t) with entries
phi_ij(t) = sum_k a_ij,k t^(2k), k = 0..d (d odd), used as the Fourier
transform phi(|u|) exp(-pi |u|^2) of the auxiliary function f. It enters
the SDP through the sum-of-squares form

    sigma(t, y) = <S0, m m^T> + <S1, t^2 m m^T>,   m_(k,i) = P_k(t^2) y_i,

and phi_ij(t) = <S0, V(t) (x) Y_ij> + <S1, t^2 V(t) (x) Y_ij> with
V = v v^T, v_k = P_k(t^2). The space side f_ij(w) = q_ij(w) exp(-pi w^2)
must be <= 0 for w >= r_i + r_j, which is imposed as

    q_ij(w) + (w^2 - (r_i + r_j)^2) <Q_ij, V(w)> = 0.

All polynomials are handled in the scaled variable x = 2 pi t^2 (or
x = 2 pi w^2), where the basis P_k and the inverse transform are rational.
The S1 block therefore multiplies x V instead of t^2 V; it is 2 pi times
smaller than the S1 of the t^2 form, which leaves the feasible set unchanged.
Only the Q terms and the ball volumes carry powers of pi.
"""

from __future__ import annotations

import csv
import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, TextIO

import mpmath

from .numerics import PiSum, ScaledRational, as_fraction, ball_volume, pi_power_enclosure, sqrt_enclosure, to_mpf
from .polynomials import BasisSpec, Poly, fourier_inverse_radial_x, make_basis_B
from .sdp_model import DIAG, PSD, SdpProblem
from .solver import SolverConfig, solve

__all__ = [
    "SphereInstance",
    "SphereSolutionView",
    "build_sphere_sdp",
    "sphere_solution_view",
    "sphere_bound",
    "florian_2d_bound",
    "sweep_spheres",
    "SPHERE_CSV_HEADER",
]

COEF_BITS = 600
EVAL_DPS = 50
Y = {
    (0, 0): ((1, 0), (0, 0)),
    (1, 1): ((0, 0), (0, 1)),
    (0, 1): ((0, Fraction(1, 2)), (Fraction(1, 2), 0)),
}


@dataclass(frozen=True)
class SphereInstance:
    """Dimension n, radii r1 <= r2 (rationals) and odd degree d."""

    n: int
    radii: tuple
    d: int

    def __post_init__(self):
        radii = tuple(as_fraction(Fraction(str(r)) if isinstance(r, float) else r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if len(radii) != 2:
            raise ValueError("only two sphere sizes are supported")
        if not 0 < radii[0] <= radii[1]:
            raise ValueError("radii must satisfy 0 < r1 <= r2")
        if self.d < 1 or self.d % 2 == 0:
            raise ValueError("d must be odd and >= 1")

    @property
    def half(self) -> int:
        return self.d // 2

    def describe(self) -> dict:
        return {"kind": "sphere", "n": self.n, "radii": [str(r) for r in self.radii], "d": self.d}


def _index(k: int, a: int) -> int:
    # Kronecker position of (V index k, Y index a) in V (x) Y
    return 2 * k + a


def _kron_terms(block: int, coef, h: int, pair, scale=1) -> list:
    """Terms of <X, C (x) Y_pair> with C[k][l] given for k, l = 0..h."""
    Yp = Y[pair]
    out = []
    for k in range(h + 1):
        for l in range(h + 1):
            c = coef[k][l]
            if c == 0:
                continue
            for a in range(2):
                for b in range(2):
                    y = Yp[a][b]
                    p, q = _index(k, a), _index(l, b)
                    if y == 0 or p > q:
                        continue
                    out.append((block, p, q, c * y * scale))
    return out


def _vol_shift(n: int, ri, rj, bits: int):
    """(vol B(r_i) vol B(r_j))^(1/2), exact when possible."""
    vi, vj = ball_volume(n, ri), ball_volume(n, rj)
    if ri == rj:
        return vi
    prod = vi.q * vj.q
    num, den = prod.numerator, prod.denominator
    sn, sd = math.isqrt(num), math.isqrt(den)
    if sn * sn == num and sd * sd == den:
        return ScaledRational(Fraction(sn, sd), vi.k)
    return sqrt_enclosure(prod, bits) * pi_power_enclosure(vi.k, bits)


@dataclass
class _Tables:
    """Polynomial matrices of the construction, in basis coordinates."""

    basis: BasisSpec
    V: list  # V[k][l]: rational Poly in x
    A0: list  # coordinates of F^-1[V_kl]
    A1: list  # coordinates of F^-1[x V_kl]
    F0: list  # F^-1[V_kl] as Poly in x_w
    F1: list  # F^-1[x V_kl] as Poly in x_w
    QX: list  # coordinates of x V_kl / 2 (multiplies pi^-1)
    Q0: list  # coordinates of V_kl (multiplies -c^2)


@functools.lru_cache(maxsize=32)
def sphere_tables(n: int, d: int, mu: tuple | None = None) -> _Tables:
    """Exact polynomial data of the construction (cached; treat as read-only)."""
    B = make_basis_B(n, d, mu)
    h = d // 2
    xpoly = Poly([Fraction(0), Fraction(1)])
    V = [[B.elements_x[k] * B.elements_x[l] for l in range(h + 1)] for k in range(h + 1)]
    F0 = [[fourier_inverse_radial_x(n, V[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    F1 = [[fourier_inverse_radial_x(n, xpoly * V[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    A0 = [[B.to_basis_x(F0[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    A1 = [[B.to_basis_x(F1[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    QX = [[B.to_basis_x((xpoly * V[k][l]).scale(Fraction(1, 2))) for l in range(h + 1)] for k in range(h + 1)]
    Q0 = [[B.to_basis_x(V[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    return _Tables(B, V, A0, A1, F0, F1, QX, Q0)


def build_sphere_sdp(inst: SphereInstance, bits: int = COEF_BITS) -> SdpProblem:
    """The binary sphere program as an SdpProblem (min M)."""
    n, d, h = inst.n, inst.d, inst.half
    T = sphere_tables(n, d)
    p = SdpProblem("min")
    S0 = p.add_block("S0", d + 1, PSD)
    S1 = p.add_block("S1", d + 1, PSD)
    pairs = [(0, 0), (1, 1), (0, 1)]
    Qb = {pr: p.add_block(f"Q{pr[0] + 1}{pr[1] + 1}", h + 1, PSD) for pr in pairs}
    Sh = p.add_block("Shift", 2, PSD)
    M = p.add_block("M", 1, DIAG)
    layout = {"S0": S0, "S1": S1, "Q": Qb, "Shift": Sh, "M": M, "pairs": {}, "link": {}, "epi": []}

    at0 = lambda P: P.coeff(0)
    F0at0 = [[at0(T.F0[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    F1at0 = [[at0(T.F1[k][l]) for l in range(h + 1)] for k in range(h + 1)]
    V0 = [[at0(T.V[k][l]) for l in range(h + 1)] for k in range(h + 1)]

    # epigraph: F^-1[phi_ii](0) <= M
    for i in range(2):
        terms = _kron_terms(S0, F0at0, h, (i, i)) + _kron_terms(S1, F1at0, h, (i, i)) + [(M, 0, 0, Fraction(-1))]
        layout["epi"].append(p.add_constraint("<=", 0, terms, f"epi{i + 1}"))
    # Shift_ij = phi_ij(0) - sqrt(vol_i vol_j)
    for i, j in pairs:
        s = _vol_shift(n, inst.radii[i], inst.radii[j], bits)
        hcoef = Fraction(1) if i == j else Fraction(1, 2)
        terms = _kron_terms(S0, V0, h, (i, j)) + [(Sh, i, j, -hcoef)]
        layout["link"][(i, j)] = p.add_constraint("=", s, terms, f"shift{i + 1}{j + 1}")
    # q_ij + (w^2 - c^2) <Q_ij, V(w)> = 0, coordinate-wise in the basis
    for i, j in pairs:
        c2 = (inst.radii[i] + inst.radii[j]) ** 2
        rows = []
        for m in range(d + 1):
            c0 = [[T.A0[k][l][m] for l in range(h + 1)] for k in range(h + 1)]
            c1 = [[T.A1[k][l][m] for l in range(h + 1)] for k in range(h + 1)]
            terms = _kron_terms(S0, c0, h, (i, j)) + _kron_terms(S1, c1, h, (i, j))
            for k in range(h + 1):
                for l in range(k, h + 1):
                    a = PiSum({-1: T.QX[k][l][m], 0: -c2 * T.Q0[k][l][m]})
                    if not a.is_zero():
                        terms.append((Qb[(i, j)], k, l, a))
            rows.append(p.add_constraint("=", 0, terms, f"id{i + 1}{j + 1}_{m}"))
        layout["pairs"][(i, j)] = rows
    p.set_objective([(M, 0, 0, Fraction(1))])
    p.meta = {"instance": inst.describe(), "layout": layout, "coef_bits": bits, "tables": T}
    return p


@dataclass
class SphereSolutionView:
    """Solved matrices and the reconstructed functions (mpf arithmetic).

    ``phi_x[(i, j)]`` and ``q_x[(i, j)]`` are polynomials in the scaled
    variables x = 2 pi t^2 and x = 2 pi w^2 respectively.
    """

    n: int
    S0: list
    S1: list
    Q: dict
    bound: object
    phi_x: dict
    q_x: dict
    status: str = "optimal"
    checks: dict = field(default_factory=dict)

    def phi(self, i: int, j: int, t):
        with mpmath.workdps(EVAL_DPS):
            t = mpmath.mpf(t)
            return self.phi_x[(min(i, j), max(i, j))](2 * mpmath.pi * t * t)

    def q(self, i: int, j: int, w):
        # heavy cancellation at large w: evaluate with guard digits
        with mpmath.workdps(EVAL_DPS):
            w = mpmath.mpf(w)
            return self.q_x[(min(i, j), max(i, j))](2 * mpmath.pi * w * w)

    def f(self, i: int, j: int, w):
        """The space-side function f_ij(w) = q_ij(w) exp(-pi w^2)."""
        with mpmath.workdps(EVAL_DPS):
            w = mpmath.mpf(w)
            return self.q(i, j, w) * mpmath.exp(-mpmath.pi * w * w)

    def a_coeffs(self, i: int, j: int) -> list:
        """a_ij,k: coefficients of t^(2k) in phi_ij."""
        px = self.phi_x[(min(i, j), max(i, j))]
        with mpmath.workdps(EVAL_DPS):
            return [c * (2 * mpmath.pi) ** k for k, c in enumerate(px.coeffs)]

    def sigma(self, t, y1, y2):
        y = (mpmath.mpf(y1), mpmath.mpf(y2))
        return sum(y[i] * y[j] * self.phi(i, j, t) for i in range(2) for j in range(2))

    def phi_matrix(self, t):
        return mpmath.matrix([[self.phi(i, j, t) for j in range(2)] for i in range(2)])


def _to_mp(M) -> list:
    return [[mpmath.mpf(float(x)) if isinstance(x, float) else mpmath.mpf(str(x)) for x in row] for row in M]


def _pair_poly(S0, S1, P0, P1, h: int, pair) -> Poly:
    """<S0, P0 (x) Y_pair> + <S1, P1 (x) Y_pair> as an mpf polynomial."""
    Yp = Y[pair]
    out = Poly([mpmath.mpf(0)])
    for k in range(h + 1):
        for l in range(h + 1):
            w0 = w1 = mpmath.mpf(0)
            for a in range(2):
                for b in range(2):
                    y = Yp[a][b]
                    if y:
                        w0 += S0[_index(k, a)][_index(l, b)] * to_mpf(y)
                        w1 += S1[_index(k, a)][_index(l, b)] * to_mpf(y)
            out = out + P0[k][l].map(lambda c, s=w0: to_mpf(c) * s)
            out = out + P1[k][l].map(lambda c, s=w1: to_mpf(c) * s)
    return out


def sphere_solution_view(p: SdpProblem, sol) -> SphereSolutionView:
    with mpmath.workdps(EVAL_DPS):
        return _view(p, sol)


def _view(p: SdpProblem, sol) -> SphereSolutionView:
    lay, T = p.meta["layout"], p.meta["tables"]
    n = p.meta["instance"]["n"]
    h = (T.basis.d) // 2
    S0, S1 = _to_mp(sol.matrices[lay["S0"]]), _to_mp(sol.matrices[lay["S1"]])
    Q = {pr: _to_mp(sol.matrices[b]) for pr, b in lay["Q"].items()}
    xpoly = Poly([Fraction(0), Fraction(1)])
    xV = [[xpoly * v for v in row] for row in T.V]
    phi = {pr: _pair_poly(S0, S1, T.V, xV, h, pr) for pr in Y}
    q = {pr: _pair_poly(S0, S1, T.F0, T.F1, h, pr) for pr in Y}
    return SphereSolutionView(n, S0, S1, Q, sol.objective, phi, q, sol.status)


def sphere_bound(inst: SphereInstance, cfg: SolverConfig | None = None):
    """(bound, status, solution view); the bound is max_i F^-1[phi_ii](0)."""
    p = build_sphere_sdp(inst)
    sol = solve(p, cfg or SolverConfig(113))
    view = sphere_solution_view(p, sol)
    return float(sol.objective), sol.status, view


def florian_2d_bound(r) -> float:
    """Florian's density bound for packings of discs of radii r and 1 (0 < r <= 1)."""
    r = float(r)
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    with mpmath.workdps(30):
        r = mpmath.mpf(r)
        num = mpmath.pi * r**2 + 2 * (1 - r**2) * mpmath.asin(r / (1 + r))
        return float(num / (2 * r * mpmath.sqrt(2 * r + 1)))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SPHERE_CSV_HEADER = ["n", "r", "sdp_bound", "florian_bound", "status"]


def _g12(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _sphere_point(args):
    n, r, d, precision = args
    flo = florian_2d_bound(r) if n == 2 else None
    try:
        b, status, _ = sphere_bound(SphereInstance(n, (r, Fraction(1)), d), SolverConfig(precision))
    except Exception as exc:  # noqa: BLE001 - a failing grid point must not stop the sweep
        return (n, r, None, flo, f"error: {type(exc).__name__}")
    return (n, r, b, flo, status)


def sweep_spheres(n: int, rgrid: Sequence, d: int, cfg: SolverConfig | None, writer: TextIO, jobs: int = 1) -> list:
    """Solve the program for radii (r, 1) over a grid of r and write CSV rows."""
    rs = [Fraction(str(r)) if isinstance(r, float) else as_fraction(r) for r in rgrid]
    if not rs:
        raise ValueError("empty grid")
    if any(not 0 < r <= 1 for r in rs):
        raise ValueError("grid values must lie in (0, 1]")
    cfg = cfg or SolverConfig(113)
    args = [(n, r, d, cfg.precision) for r in rs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sphere_point, args))
    else:
        rows = [_sphere_point(a) for a in args]
    w = csv.writer(writer, lineterminator="\n")
    w.writerow(SPHERE_CSV_HEADER)
    for n_, r, b, flo, st in rows:
        w.writerow([n_, _g12(float(r)), _g12(b), _g12(flo), st])
    return rows
