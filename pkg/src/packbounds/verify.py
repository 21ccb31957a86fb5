"""Rigorous certification of floating SDP solutions.

Pipeline: a strictly feasible floating solution (see
:func:`packbounds.solver.feasibility_recentre`) is projected onto the
affine space of the equality constraints at high precision, every PSD
block A is replaced by an exact rational matrix L L^T + lam I, and the
remaining violation of each polynomial identity is pushed into a block
with spare eigenvalue room. Only rational and interval arithmetic is used
from the rounding step on, and :func:`check` replays that part from the
stored certificate alone.

Sphere instances: the residual p_ij of each identity is written in the
basis R_0 = F^-1[V_00], R_k = (w^2 - c^2) V_{i(k) j(k)} with
i(k) = min(h, k - 1), j(k) = k - 1 - i(k). Its coordinates alpha satisfy
|alpha|_inf <= |U^-1|_inf |p|_inf, U the (upper-triangular) coefficient
matrix of the R_k. alpha_0 goes into S0 and alpha_k into Q_ij.

Cap instances (an extension of the same idea): the residual coefficient of
u^m is absorbed by the entry (min(d, m), m - min(d, m)) of Q_ij, so U = I.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from ._dense import Backend, NotPositiveDefinite
from .numerics import RationalInterval, cos_enclosure, enclose, pi_power_enclosure, sqrt_enclosure
from .polynomials import cap_weight_enclosure, jacobi
from .sdp_model import SdpProblem, SdpSolution, coef_fraction, evaluate_solution, to_standard_form

__all__ = [
    "Certificate",
    "CheckResult",
    "VerificationError",
    "project_affine",
    "rational_round_psd",
    "triangular_inverse_norm_bound",
    "residuals",
    "redistribute",
    "certify",
    "certify_instance",
    "check",
]

PI_BITS = 512
DEFAULT_ETA = Fraction(1, 10**5)


class VerificationError(RuntimeError):
    """A stage of the certification pipeline could not be carried out."""


# ---------------------------------------------------------------------------
# Stage 1: affine projection
# ---------------------------------------------------------------------------


def project_affine(sol: SdpSolution, p: SdpProblem, precision: int = 256, passes: int = 2) -> SdpSolution:
    """Least-squares projection of the blocks onto the affine constraint set.

    Works on the standard form, so an inequality row moves along with its
    slack variable; computed in mpfr arithmetic at ``precision`` bits
    (floats at 53).
    """
    be = Backend(precision)
    sf = to_standard_form(p)
    with be.active():
        mats = [be.convert(M) for M in sol.matrices]
        # every entry (block, i, j) with i <= j, and the rows touching it
        by_entry: dict = {}
        coefs = []
        for r, terms in enumerate(sf.A):
            cr = []
            for b, i, j, a in terms:
                av = be.scalar(coef_fraction(a))
                cr.append((b, i, j, av))
                by_entry.setdefault((b, i, j), []).append((r, av))
            coefs.append(cr)
        m = sf.m
        G = be.zeros(m, m)
        for (b, i, j), lst in by_entry.items():
            wgt = 1 if i == j else 2
            for r1, a1 in lst:
                for r2, a2 in lst:
                    G[r1, r2] = G[r1, r2] + wgt * a1 * a2
        try:
            L = be.cholesky(G)
        except NotPositiveDefinite as exc:
            raise VerificationError(f"project_affine: constraint system is rank deficient ({exc})") from exc
        rhs = be.array([coef_fraction(r) for r in sf.b])
        for _ in range(passes):
            res = be.zeros(m)
            for r, cr in enumerate(coefs):
                acc = rhs[r]
                for b, i, j, av in cr:
                    acc = acc - (av * mats[b][i, j] if i == j else 2 * av * mats[b][i, j])
                res[r] = acc
            w = be.chol_solve(L, res)
            for r, cr in enumerate(coefs):
                for b, i, j, av in cr:
                    mats[b][i, j] = mats[b][i, j] + w[r] * av
                    if i != j:
                        mats[b][j, i] = mats[b][j, i] + w[r] * av
        obj, viol, eigs = evaluate_solution(p, mats)
    info = dict(sol.info, projected_bits=precision)
    return SdpSolution(mats, obj, sol.status, viol, eigs, info=info)


# ---------------------------------------------------------------------------
# Stage 2: rational rounding of PSD blocks
# ---------------------------------------------------------------------------


def _dyadic(x, bits: int) -> Fraction:
    if isinstance(x, Fraction):
        return Fraction(round(x * 2**bits), 2**bits)
    scaled = gmpy2.mul(gmpy2.mpfr(x, max(gmpy2.get_context().precision, 53)), gmpy2.mpz(2) ** bits)
    return Fraction(int(gmpy2.rint(scaled)), 2**bits)


def rational_round_psd(A, precision: int = 256, round_bits: int | None = None, steps: int = 30):
    """(L, lam) with L rational lower-triangular and A ~ L L^T + lam I.

    lam is searched in [lam~/2, lam~], lam~ the floating smallest eigenvalue,
    as the largest value for which A - lam I has a Cholesky factor at
    ``precision`` bits. L rounds that factor to multiples of 2^-round_bits.
    """
    be = Backend(precision)
    rb = round_bits if round_bits is not None else precision + 24
    with be.active():
        Am = be.convert(A)
        Am = (Am + Am.T) / 2
        n = Am.shape[0]
        lam_est = float(np.linalg.eigvalsh(be.to_float(Am))[0])
        if not lam_est > 0:
            raise VerificationError(f"rational_round_psd: smallest eigenvalue {lam_est:.3e} is not positive")

        def factor(lam: Fraction):
            try:
                return be.cholesky(Am - be.eye(n, lam))
            except NotPositiveDefinite:
                return None

        hi = Fraction(lam_est)
        lo = hi / 2
        L = factor(hi)
        if L is not None:
            lam = hi
        else:
            L = factor(lo)
            if L is None:
                raise VerificationError("rational_round_psd: Cholesky fails already at lam~/2")
            for _ in range(steps):
                mid = (lo + hi) / 2
                Lm = factor(mid)
                if Lm is None:
                    hi = mid
                else:
                    lo, L = mid, Lm
            lam = lo
        Lbar = [[_dyadic(L[i, j], rb) if j <= i else Fraction(0) for j in range(n)] for i in range(n)]
    return Lbar, lam


def reconstruct(Lbar, lam) -> list:
    """The exact matrix L L^T + lam I."""
    n = len(Lbar)
    if any(len(row) != n for row in Lbar):
        raise VerificationError("factor is not square")
    if any(Lbar[i][j] != 0 for i in range(n) for j in range(i + 1, n)):
        raise VerificationError("factor is not lower triangular")
    den = 1
    for row in Lbar:
        for x in row:
            den = den * x.denominator // gmpy2.gcd(den, x.denominator)
    N = [[int(x * den) for x in row] for row in Lbar]
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            s = sum(N[i][k] * N[j][k] for k in range(min(i, j) + 1))
            row.append(Fraction(s, den * den) + (lam if i == j else 0))
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# Stage 3: norm bound for the basis change
# ---------------------------------------------------------------------------


def triangular_inverse_norm_bound(U) -> Fraction:
    """Upper bound on |U^-1|_inf for triangular U (Fractions or intervals).

    Uses the comparison matrix M(U) (|diagonal|, -|off-diagonal|): for
    triangular U, |U^-1| <= M(U)^-1 entrywise, and M(U)^-1 e is found by
    exact substitution since its entries are nonnegative.
    """
    n = len(U)
    I = lambda x: x if isinstance(x, RationalInterval) else RationalInterval.point(x)
    lower = any(U[i][j] != 0 and not (isinstance(U[i][j], RationalInterval) and U[i][j].mag() == 0)
                for i in range(n) for j in range(i))
    upper = any(U[i][j] != 0 and not (isinstance(U[i][j], RationalInterval) and U[i][j].mag() == 0)
                for i in range(n) for j in range(i + 1, n))
    if lower and upper:
        raise ValueError("matrix is not triangular")
    diag = [I(U[i][i]).mig() for i in range(n)]
    if any(x == 0 for x in diag):
        raise ZeroDivisionError("triangular matrix has a zero (or zero-containing) diagonal entry")
    x = [Fraction(0)] * n
    order = range(n) if lower else range(n - 1, -1, -1)
    for i in order:
        js = range(i) if lower else range(i + 1, n)
        x[i] = (1 + sum((I(U[i][j]).mag() * x[j] for j in js), Fraction(0))) / diag[i]
    return max(x) if x else Fraction(0)


# ---------------------------------------------------------------------------
# Problem-specific data (rebuilt from the instance description alone)
# ---------------------------------------------------------------------------


def _sphere_context(inst: dict, pi_bits: int) -> dict:
    from .euclidean_bounds import _vol_shift, sphere_tables

    n, d = int(inst["n"]), int(inst["d"])
    radii = [Fraction(r) for r in inst["radii"]]
    mu = tuple(Fraction(m) for m in inst["mu"])
    T = sphere_tables(n, d, mu)
    pairs = [(0, 0), (1, 1), (0, 1)]
    return {
        "n": n, "d": d, "h": d // 2, "T": T, "pairs": pairs,
        "c2": {pr: (radii[pr[0]] + radii[pr[1]]) ** 2 for pr in pairs},
        "vol": {pr: enclose(_vol_shift(n, radii[pr[0]], radii[pr[1]], pi_bits), pi_bits) for pr in pairs},
        "pinv": pi_power_enclosure(-1, pi_bits),
    }


def _cap_instance(inst: dict):
    from .cap_bounds import CapInstance, parse_angle

    return CapInstance(int(inst["n"]), [parse_angle(a) for a in inst["alphas"]], int(inst["d"]))


def _cap_context(inst: dict, pi_bits: int) -> dict:
    from .cap_bounds import _pair_sum_enclosure, _pair_sum_vs_pi

    ci = _cap_instance(inst)
    n, N, d = ci.n, ci.N, ci.d
    w = [cap_weight_enclosure(n, a, pi_bits) for a in ci.alphas]
    rel, cos = {}, {}
    for i in range(N):
        for j in range(i, N):
            rel[(i, j)] = _pair_sum_vs_pi(ci.alphas[i], ci.alphas[j])
            if rel[(i, j)] < 0:
                cos[(i, j)] = cos_enclosure(_pair_sum_enclosure(ci.alphas[i], ci.alphas[j], pi_bits), pi_bits)
    shift = {(i, j): (w[i] if i == j else sqrt_enclosure(w[i] * w[j], pi_bits)) for i in range(N) for j in range(i, N)}
    return {"n": n, "N": N, "d": d, "P": [jacobi(n, k) for k in range(2 * d + 1)], "rel": rel, "cos": cos, "shift": shift}


def _pair_name(pr) -> str:
    return f"{pr[0] + 1}{pr[1] + 1}"


def sphere_block_names(d: int) -> list:
    return ["S0", "S1", "Q11", "Q22", "Q12"]


def cap_block_names(inst: dict) -> list:
    ctx = _cap_context(inst, 64)
    names = ["G"] + [f"F{k}" for k in range(1, 2 * ctx["d"] + 1)]
    for (i, j), r in sorted(ctx["rel"].items()):
        if r < 0:
            names += [f"Q{i}{j}", f"R{i}{j}"]
    return names


# ---------------------------------------------------------------------------
# Work in progress
# ---------------------------------------------------------------------------


@dataclass
class Draft:
    """Exact matrices L L^T + lam I of every certified block, before redistribution."""

    kind: str
    instance: dict
    factors: dict  # block name -> rational lower-triangular factor
    lam: dict  # block name -> rational eigenvalue lower bound
    pi_bits: int = PI_BITS
    matrices: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sphere", "cap"):
            raise VerificationError(f"certification of {self.kind!r} instances is not supported")
        for name, L in self.factors.items():
            if not self.lam[name] > 0:
                raise VerificationError(f"block {name}: eigenvalue bound {self.lam[name]} is not positive")
            self.matrices[name] = reconstruct(L, self.lam[name])
        if self.kind == "sphere":
            self.context = _sphere_context(self.instance, self.pi_bits)
            expect = sphere_block_names(self.context["d"])
        else:
            self.context = _cap_context(self.instance, self.pi_bits)
            expect = cap_block_names(self.instance)
        missing = set(expect) - set(self.factors)
        if missing:
            raise VerificationError(f"missing blocks {sorted(missing)}")


def _add_into(acc: list, coeffs, scale):
    for m, c in enumerate(coeffs):
        if c != 0:
            acc[m] = acc[m] + c * scale


def _kron_weights(S, h: int, pair) -> list:
    from .euclidean_bounds import Y

    Yp = Y[pair]
    out = [[Fraction(0)] * (h + 1) for _ in range(h + 1)]
    for k in range(h + 1):
        for l in range(h + 1):
            out[k][l] = sum((Yp[a][b] * S[2 * k + a][2 * l + b] for a in range(2) for b in range(2) if Yp[a][b]), Fraction(0))
    return out


def _sphere_residuals(dr: Draft) -> dict:
    ctx, T, h, d = dr.context, dr.context["T"], dr.context["h"], dr.context["d"]
    S0, S1 = dr.matrices["S0"], dr.matrices["S1"]
    out = {}
    for pr in ctx["pairs"]:
        Q = dr.matrices["Q" + _pair_name(pr)]
        w0, w1 = _kron_weights(S0, h, pr), _kron_weights(S1, h, pr)
        rat = [Fraction(0)] * (d + 2)
        per_pi = [Fraction(0)] * (d + 2)
        c2 = ctx["c2"][pr]
        for k in range(h + 1):
            for l in range(h + 1):
                _add_into(rat, T.F0[k][l].coeffs, w0[k][l])
                _add_into(rat, T.F1[k][l].coeffs, w1[k][l])
                _add_into(rat, T.V[k][l].coeffs, -c2 * Q[k][l])
                # (x / (2 pi)) V_kl = pi^-1 (x V_kl / 2)
                _add_into(per_pi, [Fraction(0)] + list(T.V[k][l].coeffs), Q[k][l] / 2)
        out[pr] = [ctx["pinv"] * b + a for a, b in zip(rat, per_pi)]
    return out


def _cap_residuals(dr: Draft) -> dict:
    ctx, d = dr.context, dr.context["d"]
    G = dr.matrices["G"]
    out = {}
    for (i, j), rel in sorted(ctx["rel"].items()):
        if rel > 0:
            continue
        F0ij = ctx["shift"][(i, j)] + G[i][j]
        coef = lambda k: F0ij if k == 0 else dr.matrices[f"F{k}"][i][j]
        if rel == 0:
            out[(i, j)] = [sum((coef(k) * ctx["P"][k](Fraction(-1)) for k in range(2 * d + 1)), RationalInterval.point(0))]
            continue
        Q, R, c = dr.matrices[f"Q{i}{j}"], dr.matrices[f"R{i}{j}"], ctx["cos"][(i, j)]
        p = []
        for m in range(2 * d + 1):
            acc = RationalInterval.point(0)
            for k in range(2 * d + 1):
                pc = ctx["P"][k].coeff(m)
                if pc != 0:
                    acc = acc + coef(k) * pc
            acc = acc + sum((Q[a][m - a] for a in range(d + 1) if 0 <= m - a <= d), Fraction(0))
            for shift, cf in ((0, c), (1, c - 1), (2, Fraction(-1))):
                s = m - shift
                tot = sum((R[a][s - a] for a in range(d) if 0 <= s - a <= d - 1), Fraction(0))
                if tot != 0:
                    acc = acc + cf * tot
            p.append(acc)
        out[(i, j)] = p
    return out


def residuals(dr: Draft) -> dict:
    """Interval coefficients of every identity residual (monomial basis)."""
    return _sphere_residuals(dr) if dr.kind == "sphere" else _cap_residuals(dr)


# ---------------------------------------------------------------------------
# Stage 4: redistribution and the certified bound
# ---------------------------------------------------------------------------


def _up(x: Fraction, sig: int = 64) -> Fraction:
    """Round x >= 0 up to ``sig`` significant bits (keeps stored numbers short)."""
    if x <= 0:
        return Fraction(0)
    e = x.numerator.bit_length() - x.denominator.bit_length() - sig
    return _ceil_grid(x, e)


def _ceil_grid(x: Fraction, e: int) -> Fraction:
    s = Fraction(2) ** e
    return -((-x) // s) * s


def _down(x: Fraction, bits: int = 200) -> Fraction:
    s = Fraction(1, 2**bits)
    return (x // s) * s


def _norm(p) -> Fraction:
    return max((RationalInterval._lift(c).mag() for c in p), default=Fraction(0))


def _sphere_basis_matrix(ctx: dict, pr) -> list:
    T, h, d = ctx["T"], ctx["h"], ctx["d"]
    cols = [[RationalInterval.point(c) for c in T.F0[0][0].coeffs]]
    for k in range(1, d + 1):
        i = min(h, k - 1)
        j = k - 1 - i
        V = list(T.V[i][j].coeffs)
        col = [RationalInterval.point(0)] * (d + 1)
        for m, v in enumerate(V):
            col[m] = col[m] - ctx["c2"][pr] * v
            col[m + 1] = col[m + 1] + ctx["pinv"] * (v / 2)
        cols.append(col)
    return [[cols[k][m] if m < len(cols[k]) else RationalInterval.point(0) for k in range(d + 1)] for m in range(d + 1)]


def _redistribute_sphere(dr: Draft, res: dict):
    ctx, T, h, d = dr.context, dr.context["T"], dr.context["h"], dr.context["d"]
    alpha, checks, margins = {}, {}, {}
    for pr in ctx["pairs"]:
        p = res[pr]
        if any(RationalInterval._lift(c).mag() != 0 for c in p[d + 1:]):
            raise VerificationError(f"residual of pair {_pair_name(pr)} has degree above {d}")
        U = _sphere_basis_matrix(ctx, pr)
        alpha[pr] = _up(triangular_inverse_norm_bound(U) * _norm(p[: d + 1]))
        q = "Q" + _pair_name(pr)
        margins[q] = dr.lam[q] - d * alpha[pr]
    a11, a22, a12 = alpha[(0, 0)], alpha[(1, 1)], alpha[(0, 1)]
    margins["S0"] = dr.lam["S0"] - max(a11 + a12, a22 + a12)
    # phi(0) - sqrt(vol_i vol_j) must stay PSD after the S0 change
    S0, S1 = dr.matrices["S0"], dr.matrices["S1"]
    v00 = T.V[0][0].coeff(0)
    r00 = T.F0[0][0].coeff(0)
    M = {}
    for pr in ctx["pairs"]:
        w0 = _kron_weights(S0, h, pr)
        phi0 = sum((w0[k][l] * T.V[k][l].coeff(0) for k in range(h + 1) for l in range(h + 1)), Fraction(0))
        M[pr] = RationalInterval(-alpha[pr], alpha[pr]) * v00 + phi0 - ctx["vol"][pr]
    m11, m22, m12 = M[(0, 0)], M[(1, 1)], M[(0, 1)]
    margins["shift_diag"] = min(m11.lo, m22.lo)
    margins["shift_det"] = (m11.lo * m22.lo - m12.mag() ** 2) if margins["shift_diag"] >= 0 else margins["shift_diag"]
    objs = []
    for i in range(2):
        pr = (i, i)
        w0, w1 = _kron_weights(S0, h, pr), _kron_weights(S1, h, pr)
        val = sum((w0[k][l] * T.F0[k][l].coeff(0) + w1[k][l] * T.F1[k][l].coeff(0)
                   for k in range(h + 1) for l in range(h + 1)), Fraction(0))
        objs.append(RationalInterval(-alpha[pr], alpha[pr]) * r00 + val)
    bound = RationalInterval(max(o.lo for o in objs), max(o.hi for o in objs))
    return {_pair_name(pr): a for pr, a in alpha.items()}, margins, bound


def _redistribute_cap(dr: Draft, res: dict):
    ctx, d, N = dr.context, dr.context["d"], dr.context["N"]
    alpha, margins = {}, {}
    for (i, j), p in res.items():
        if ctx["rel"][(i, j)] == 0:
            margins[f"antipodal{i}{j}"] = -p[0].hi
            continue
        # U = I: coefficient m goes to Q entry (min(d, m), m - min(d, m))
        alpha[(i, j)] = _up(triangular_inverse_norm_bound([[int(a == b) for b in range(len(p))] for a in range(len(p))]) * _norm(p))
        margins[f"Q{i}{j}"] = dr.lam[f"Q{i}{j}"] - (2 * d + 1) * alpha[(i, j)]
    objs = []
    for i in range(N):
        val = ctx["shift"][(i, i)] + dr.matrices["G"][i][i]
        val = val + sum((dr.matrices[f"F{k}"][i][i] for k in range(1, 2 * d + 1)), Fraction(0))
        objs.append(val)
    bound = RationalInterval(max(o.lo for o in objs), max(o.hi for o in objs))
    return {f"{i}{j}": a for (i, j), a in alpha.items()}, margins, bound


def redistribute(dr: Draft, res: dict, float_bound=None) -> "Certificate":
    """Bound the residual coordinates, test the feasibility inequalities, bound the objective."""
    if dr.kind == "sphere":
        alpha, margins, bound = _redistribute_sphere(dr, res)
    else:
        alpha, margins, bound = _redistribute_cap(dr, res)
    margins = {k: _down(v) for k, v in margins.items()}
    bound = RationalInterval(_down(bound.lo), -_down(-bound.hi))
    failed = sorted(k for k, v in margins.items() if v < 0)
    verdict = "certified" if not failed else "failed: " + ", ".join(f"{k} short by {float(-margins[k]):.3e}" for k in failed)
    return Certificate(
        instance=dr.instance,
        factors=dr.factors,
        lam={k: v for k, v in dr.lam.items() if not k.startswith("Q")},
        mu={k: v for k, v in dr.lam.items() if k.startswith("Q")},
        alpha_bounds=alpha,
        margins=margins,
        pi_bits=dr.pi_bits,
        bound=bound,
        verdict=verdict,
        float_bound=float_bound,
    )


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


def _qstr(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass
class Certificate:
    instance: dict
    factors: dict
    lam: dict
    mu: dict
    alpha_bounds: dict
    margins: dict
    pi_bits: int
    bound: RationalInterval
    verdict: str
    float_bound: float | None = None

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def _payload(self) -> dict:
        return {
            "instance": self.instance,
            "matrices": {k: [[_qstr(x) for x in row] for row in L] for k, L in sorted(self.factors.items())},
            "lambda": {k: _qstr(v) for k, v in sorted(self.lam.items())},
            "mu": {k: _qstr(v) for k, v in sorted(self.mu.items())},
            "pi_bits": self.pi_bits,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self._payload(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self) -> dict:
        out = self._payload()
        out.update(
            alpha_bounds={k: _qstr(v) for k, v in sorted(self.alpha_bounds.items())},
            margins={k: _qstr(v) for k, v in sorted(self.margins.items())},
            bound={"lo": _qstr(self.bound.lo), "hi": _qstr(self.bound.hi)},
            verdict=self.verdict,
            float_bound=self.float_bound,
            fingerprint=self.fingerprint(),
        )
        return out

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def from_json(cls, data: dict) -> "Certificate":
        F = Fraction
        return cls(
            instance=data["instance"],
            factors={k: [[F(x) for x in row] for row in L] for k, L in data["matrices"].items()},
            lam={k: F(v) for k, v in data["lambda"].items()},
            mu={k: F(v) for k, v in data["mu"].items()},
            alpha_bounds={k: F(v) for k, v in data.get("alpha_bounds", {}).items()},
            margins={k: F(v) for k, v in data.get("margins", {}).items()},
            pi_bits=int(data["pi_bits"]),
            bound=RationalInterval(F(data["bound"]["lo"]), F(data["bound"]["hi"])),
            verdict=data["verdict"],
            float_bound=data.get("float_bound"),
        )

    @classmethod
    def load(cls, path) -> "Certificate":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def summary(self) -> str:
        return (f"{self.instance.get('kind')} instance: {self.verdict}; "
                f"bound in [{float(self.bound.lo):.10f}, {float(self.bound.hi):.10f}]")


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _kind(p: SdpProblem) -> str:
    return p.meta.get("instance", {}).get("kind", "unknown")


def certify(instance, sol: SdpSolution, p: SdpProblem, precision: int = 256, pi_bits: int = PI_BITS,
            round_bits: int | None = None) -> Certificate:
    """Project, round, bound the residuals and redistribute them.

    ``sol`` should come from feasibility_recentre so that every block has
    eigenvalue room. Raises VerificationError naming the failing stage;
    a completed pipeline whose inequalities fail returns a 'failed' verdict.
    """
    kind = _kind(p)
    if kind not in ("sphere", "cap"):
        raise VerificationError(f"certification of {kind!r} instances is not supported")
    desc = dict(p.meta["instance"])
    if kind == "sphere":
        desc["mu"] = [str(m) for m in p.meta["tables"].basis.mu]
        names = sphere_block_names(desc["d"])
    else:
        names = cap_block_names(desc)
    proj = project_affine(sol, p, precision)
    factors, lam = {}, {}
    for name in names:
        try:
            factors[name], lam[name] = rational_round_psd(proj.matrices[p.block_index(name)], precision, round_bits)
        except VerificationError as exc:
            raise VerificationError(f"block {name}: {exc}") from exc
    dr = Draft(kind, desc, factors, lam, pi_bits)
    return redistribute(dr, residuals(dr), float_bound=float(sol.objective))


def certify_instance(inst, eta=DEFAULT_ETA, precision: int = 256, cfg=None, pi_bits: int = PI_BITS) -> Certificate:
    """Solve, recentre with slack eta and certify a cap or sphere instance."""
    from .cap_bounds import CapInstance, build_cap_sdp
    from .euclidean_bounds import SphereInstance, build_sphere_sdp
    from .solver import SolverConfig, feasibility_recentre, solve

    if isinstance(inst, SphereInstance):
        p = build_sphere_sdp(inst)
    elif isinstance(inst, CapInstance):
        p = build_cap_sdp(inst)
    else:
        raise VerificationError(f"certification of {type(inst).__name__} is not supported")
    cfg = cfg or SolverConfig(113)
    sol = solve(p, cfg)
    if sol.status == "failed":
        raise VerificationError("solve: solver failed")
    rec = feasibility_recentre(p, sol.objective, eta, cfg)
    cert = certify(inst, rec, p, precision, pi_bits)
    cert.float_bound = float(sol.objective)
    return cert


@dataclass
class CheckResult:
    ok: bool
    failures: list
    bound: RationalInterval | None = None

    def __bool__(self):
        return self.ok


def check(cert) -> CheckResult:
    """Replay a certificate with rational and interval arithmetic only."""
    if isinstance(cert, dict):
        stored_fp = cert.get("fingerprint")
        try:
            cert = Certificate.from_json(cert)
        except (KeyError, ValueError, ZeroDivisionError, TypeError) as exc:
            return CheckResult(False, [f"malformed certificate: {exc}"])
    else:
        stored_fp = cert.fingerprint()
    failures = []
    if stored_fp != cert.fingerprint():
        failures.append("fingerprint does not match the stored data")
    lam = dict(cert.lam, **cert.mu)
    if set(lam) != set(cert.factors):
        failures.append("eigenvalue bounds and factors name different blocks")
        return CheckResult(False, failures)
    try:
        dr = Draft(cert.instance.get("kind"), cert.instance, cert.factors, lam, cert.pi_bits)
        replay = redistribute(dr, residuals(dr))
    except (VerificationError, ValueError, KeyError, IndexError, ZeroDivisionError) as exc:
        failures.append(f"replay failed: {exc}")
        return CheckResult(False, failures)
    if replay.alpha_bounds != cert.alpha_bounds:
        failures.append("residual bounds differ from the replay")
    if replay.margins != cert.margins:
        failures.append("feasibility margins differ from the replay")
    if replay.bound != cert.bound:
        failures.append("certified bound differs from the replay")
    if replay.verdict != cert.verdict:
        failures.append(f"verdict differs: stored {cert.verdict!r}, replay {replay.verdict!r}")
    if not replay.certified:
        failures.append(f"replay verdict is {replay.verdict!r}")
    return CheckResult(not failures, failures, replay.bound)
