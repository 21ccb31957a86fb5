"""Embedded primal-dual interior-point SDP solver.

Infeasible path-following method on the standard form

    min <C, X>  s.t.  <A_k, X> = b_k,  X = diag(X_1, ..., X_B) >= 0,

with the HKM search direction (dX = (K - X dZ) Z^-1, symmetrized) and a
Mehrotra predictor-corrector step. Diagonal blocks are stored as vectors.
Arithmetic is float64 at 53 bits and gmpy2 mpfr object arrays otherwise.
The practical size cap is about 200 rows per block; larger programs should be
exported with :func:`packbounds.sdp_model.export_sdpa`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._dense import Backend, NotPositiveDefinite, backend_for
from .sdp_model import DIAG, SdpProblem, SdpSolution, coef_fraction, evaluate_solution, to_standard_form

__all__ = ["SolverConfig", "solve", "feasibility_recentre", "RecentreError", "SolverError"]

log = logging.getLogger(__name__)

_DEFAULT_TOL = {53: 1e-7, 113: 1e-20, 256: 1e-45}


class SolverError(RuntimeError):
    pass


class RecentreError(SolverError):
    pass


@dataclass
class SolverConfig:
    precision: int = 53
    tolerance: float | None = None
    max_iterations: int = 250
    step_fraction: float = 0.95
    verbose: bool = False

    def __post_init__(self):
        if self.precision not in (53, 113, 256):
            raise ValueError("precision must be 53, 113 or 256 bits")
        if self.tolerance is None:
            self.tolerance = _DEFAULT_TOL[self.precision]
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class _Data:
    """Dense per-block constraint data for one standard-form problem."""

    kinds: list
    sizes: list
    A: list = field(default_factory=list)  # per block: (m, n, n) or (m, n) arrays
    C: list = field(default_factory=list)
    b: object = None
    m: int = 0


def _build_data(sf, be: Backend) -> _Data:
    m = sf.m
    data = _Data([blk.kind for blk in sf.blocks], [blk.size for blk in sf.blocks], m=m)
    fr = [[[] for _ in sf.blocks] for _ in range(m)]
    for k, terms in enumerate(sf.A):
        for b, i, j, a in terms:
            fr[k][b].append((i, j, coef_fraction(a)))
    for bidx, blk in enumerate(sf.blocks):
        n = blk.size
        if blk.kind == DIAG:
            A = be.zeros(m, n)
            for k in range(m):
                for i, _, a in fr[k][bidx]:
                    A[k, i] = A[k, i] + be.scalar(a)
            C = be.zeros(n)
        else:
            A = be.zeros(m, n, n)
            for k in range(m):
                for i, j, a in fr[k][bidx]:
                    v = be.scalar(a)
                    A[k, i, j] = A[k, i, j] + v
                    if i != j:
                        A[k, j, i] = A[k, j, i] + v
            C = be.zeros(n, n)
        data.A.append(A)
        data.C.append(C)
    for b, i, j, a in sf.C:
        v = be.scalar(coef_fraction(a))
        if data.kinds[b] == DIAG:
            data.C[b][i] = data.C[b][i] + v
        else:
            data.C[b][i, j] = data.C[b][i, j] + v
            if i != j:
                data.C[b][j, i] = data.C[b][j, i] + v
    data.b = be.array([coef_fraction(r) for r in sf.b])
    return data


class _IPM:
    def __init__(self, data: _Data, be: Backend, cfg: SolverConfig):
        self.d, self.be, self.cfg = data, be, cfg
        # active constraint rows per block keep the Schur assembly small
        self.rows = []
        for A, kind in zip(data.A, data.kinds):
            f = be.to_float(A).reshape(A.shape[0], -1)
            self.rows.append(np.nonzero(np.any(f != 0, axis=1))[0])

    def gram_factor(self):
        """Cholesky factor of A A^T, used to restore A(dX) = rp after the Schur solve."""
        be, m = self.be, self.d.m
        G = be.zeros(m, m)
        for A, kind, r in zip(self.d.A, self.d.kinds, self.rows):
            if len(r) == 0:
                continue
            Af = A[r].reshape(len(r), -1)
            G[np.ix_(r, r)] = G[np.ix_(r, r)] + Af @ Af.T
        shift = be.scalar(max(be.norm_inf(np.diag(G)), 1.0) * 2.0 ** -(be.bits - 8))
        for i in range(m):
            G[i, i] = G[i, i] + shift
        return be.cholesky(G)

    # -- operators ------------------------------------------------------------
    def inner(self, X, Y):
        tot = 0
        for kind, x, y in zip(self.d.kinds, X, Y):
            tot = tot + (x @ y if kind == DIAG else np.sum(x * y))
        return tot

    def A_op(self, X):
        out = self.be.zeros(self.d.m)
        for A, kind, x, r in zip(self.d.A, self.d.kinds, X, self.rows):
            if len(r) == 0:
                continue
            if kind == DIAG:
                out[r] = out[r] + A[r] @ x
            else:
                n = x.shape[0]
                out[r] = out[r] + A[r].reshape(len(r), n * n) @ x.reshape(n * n)
        return out

    def At_op(self, y):
        out = []
        for A, kind, r, n in zip(self.d.A, self.d.kinds, self.rows, self.d.sizes):
            if len(r) == 0:
                out.append(self.be.zeros(n) if kind == DIAG else self.be.zeros(n, n))
            elif kind == DIAG:
                out.append(y[r] @ A[r])
            else:
                out.append((y[r] @ A[r].reshape(len(r), n * n)).reshape(n, n))
        return out

    def sym(self, M):
        return (M + M.T) / 2

    def max_step(self, X, dX, chol):
        """Largest alpha with X + alpha dX >= 0 (math.inf when unbounded)."""
        amax = math.inf
        for kind, x, dx, L in zip(self.d.kinds, X, dX, chol):
            if kind == DIAG:
                xf, dxf = self.be.to_float(x), self.be.to_float(dx)
                neg = dxf < 0
                if np.any(neg):
                    amax = min(amax, float(np.min(-xf[neg] / dxf[neg])))
            else:
                lam = self.be.min_eig_congruence(L, dx)
                if lam < 0:
                    amax = min(amax, -1.0 / lam)
        return amax

    def chol_all(self, X):
        return [None if kind == DIAG else self.be.cholesky(x) for kind, x in zip(self.d.kinds, X)]

    def pd_all(self, X):
        for kind, x in zip(self.d.kinds, X):
            if kind == DIAG:
                if not all(v > 0 for v in x):
                    return False
            elif not self.be.is_pd(x):
                return False
        return True

    def schur(self, X, Zinv):
        be, m = self.be, self.d.m
        M = be.zeros(m, m)
        for A, kind, x, zi, r in zip(self.d.A, self.d.kinds, X, Zinv, self.rows):
            if len(r) == 0:
                continue
            Ar = A[r]
            if kind == DIAG:
                blk = (Ar * (x * zi)) @ Ar.T
            else:
                n = x.shape[0]
                T = np.matmul(np.matmul(x, Ar), zi)
                blk = Ar.reshape(len(r), n * n) @ T.reshape(len(r), n * n).T
            M[np.ix_(r, r)] = M[np.ix_(r, r)] + blk
        return self.sym(M)

    def solve_schur(self, M, rhs):
        be = self.be
        try:
            L = be.cholesky(M)
        except NotPositiveDefinite:
            diag = be.to_float(np.diag(M))
            shift = be.scalar(max(float(np.max(np.abs(diag))), 1.0) * (2.0 ** -(be.bits - 10)))
            M2 = M.copy()
            for i in range(M.shape[0]):
                M2[i, i] = M2[i, i] + shift
            L = be.cholesky(M2)
        x = be.chol_solve(L, rhs)
        # iterative refinement against the unshifted matrix
        for _ in range(2):
            x = x + be.chol_solve(L, rhs - M @ x)
        return x

    # -- main loop ------------------------------------------------------------
    def run(self):
        be, d, cfg = self.be, self.d, self.cfg
        ntot = sum(d.sizes)
        bnorm = be.norm_inf(d.b)
        Cnorm = max([be.norm_inf(c) for c in d.C] + [0.0])
        Anorm = max(max((be.norm_inf(A) for A in d.A), default=1.0), 1e-300)
        xi_p = max(10.0, math.sqrt(ntot), ntot * (1 + bnorm) / (1 + Anorm))
        xi_d = max(10.0, math.sqrt(ntot), Anorm, Cnorm)
        X = [be.array(np.full(n, xi_p)) if k == DIAG else be.eye(n, xi_p) for k, n in zip(d.kinds, d.sizes)]
        Z = [be.array(np.full(n, xi_d)) if k == DIAG else be.eye(n, xi_d) for k, n in zip(d.kinds, d.sizes)]
        y = be.zeros(d.m)
        tol = cfg.tolerance
        status, it = "failed", 0
        history = []
        best_dual = -math.inf
        small_steps = 0
        best = None
        Gch = self.gram_factor()
        for it in range(cfg.max_iterations):
            rp = d.b - self.A_op(X)
            Aty = self.At_op(y)
            Rd = [c - z - a for c, z, a in zip(d.C, Z, Aty)]
            pobj, dobj = self.inner(d.C, X), d.b @ y
            mu = self.inner(X, Z) / ntot
            pinf = be.norm_inf(rp) / (1 + bnorm)
            dinf = max(be.norm_inf(r) for r in Rd) / (1 + Cnorm)
            gap = abs(float(pobj - dobj)) / (1 + abs(float(pobj)) + abs(float(dobj)))
            history.append((it, float(pobj), float(dobj), pinf, dinf, gap))
            if dinf <= tol:
                best_dual = max(best_dual, float(dobj))
            if cfg.verbose:
                log.info("it %3d pobj %.12e dobj %.12e pinf %.2e dinf %.2e gap %.2e", it, float(pobj), float(dobj), pinf, dinf, gap)
            err = max(pinf, dinf, gap)
            if best is None or err < best[0]:
                best = (err, X, y, Z)
            if pinf <= tol and dinf <= tol and gap <= tol:
                status = "optimal"
                break
            if it - 30 > min(k for k, h in enumerate(history) if max(h[3:]) <= 1.0001 * best[0]):
                # no progress for 30 iterations
                break
            try:
                Zinv, Zch = [], []
                for kind, z in zip(d.kinds, Z):
                    if kind == DIAG:
                        Zinv.append(1 / z)
                        Zch.append(None)
                    else:
                        zi, L = be.inv_spd(z)
                        Zinv.append(zi)
                        Zch.append(L)
                Xch = self.chol_all(X)
                M = self.schur(X, Zinv)

                def direction(Kz):
                    # Kz = K Z^-1 where K is the complementarity target
                    XRZ = [x * r * zi if k == DIAG else x @ r @ zi for k, x, r, zi in zip(d.kinds, X, Rd, Zinv)]
                    rhs = rp - self.A_op(Kz) + self.A_op(XRZ)
                    dy = self.solve_schur(M, rhs)
                    Atdy = self.At_op(dy)
                    dZ = [r - a for r, a in zip(Rd, Atdy)]
                    dX = []
                    for k, x, dz, zi, kz in zip(d.kinds, X, dZ, Zinv, Kz):
                        if k == DIAG:
                            dX.append(kz - x * dz * zi)
                        else:
                            dX.append(self.sym(kz - x @ dz @ zi))
                    # the Schur system is badly conditioned near the optimum;
                    # a least-squares correction keeps the primal step consistent
                    w = be.chol_solve(Gch, rp - self.A_op(dX))
                    dX = [dx + c for dx, c in zip(dX, self.At_op(w))]
                    return dX, dy, dZ

                # predictor: K = -XZ
                Kz = [-x for x in X]
                dXa, dya, dZa = direction(Kz)
                ap = min(1.0, cfg.step_fraction * self.max_step(X, dXa, Xch))
                ad = min(1.0, cfg.step_fraction * self.max_step(Z, dZa, Zch))
                mu_aff = self.inner([x + ap * dx for x, dx in zip(X, dXa)], [z + ad * dz for z, dz in zip(Z, dZa)]) / ntot
                ratio = max(float(mu_aff / mu), 0.0) if float(mu) > 0 else 0.0
                sigma = min(1.0, ratio ** 3) if (pinf < 1 and dinf < 1) else min(1.0, max(ratio ** 2, 0.1))
                # corrector: K = sigma mu I - XZ - dXa dZa
                Kz = []
                for k, x, zi, dxa, dza in zip(d.kinds, X, Zinv, dXa, dZa):
                    if k == DIAG:
                        Kz.append(sigma * mu * zi - x - dxa * dza * zi)
                    else:
                        Kz.append(sigma * mu * zi - x - dxa @ dza @ zi)
                dX, dy, dZ = direction(Kz)
            except (NotPositiveDefinite, ValueError, ArithmeticError) as exc:
                # includes non-finite iterates on infeasible problems
                log.debug("breakdown at iteration %d: %s", it, exc)
                break
            ap = min(1.0, cfg.step_fraction * self.max_step(X, dX, Xch))
            ad = min(1.0, cfg.step_fraction * self.max_step(Z, dZ, Zch))
            # guard against float64 step estimates that leave the cone
            for _ in range(30):
                Xn = [x + ap * dx for x, dx in zip(X, dX)]
                if self.pd_all(Xn):
                    break
                ap *= 0.8
            for _ in range(30):
                Zn = [z + ad * dz for z, dz in zip(Z, dZ)]
                if self.pd_all(Zn):
                    break
                ad *= 0.8
            X, Z = Xn, Zn
            y = y + ad * dy
            small_steps = small_steps + 1 if max(ap, ad) < 1e-8 else 0
            if small_steps >= 5:
                break
        if status != "optimal" and best is not None:
            _, X, y, Z = best
        rp = d.b - self.A_op(X)
        pinf = be.norm_inf(rp) / (1 + bnorm)
        if status != "optimal":
            status = "feasible" if pinf <= tol else "failed"
        return X, y, Z, status, it, history, best_dual


def _expand(X, kinds, be):
    out = []
    for k, x in zip(kinds, X):
        if k == DIAG:
            M = be.zeros(len(x), len(x))
            for i, v in enumerate(x):
                M[i, i] = v
            out.append(M)
        else:
            out.append(x)
    return out


def solve(p: SdpProblem, cfg: SolverConfig | None = None) -> SdpSolution:
    """Solve p; status "optimal" means gap and infeasibilities are below tolerance."""
    cfg = cfg or SolverConfig()
    sf = to_standard_form(p)
    be = backend_for(cfg.precision)
    with be.active():
        data = _build_data(sf, be)
        ipm = _IPM(data, be, cfg)
        X, y, Z, status, iters, history, best_dual = ipm.run()
        mats = _expand(X, data.kinds, be)
        obj, viol, eigs = evaluate_solution(p, mats)
        dual_obj = data.b @ y
        if sf.sign < 0:
            dual_obj = -dual_obj
    info = {
        "iterations": iters,
        "precision": cfg.precision,
        "dual_objective": float(dual_obj),
        "history": history,
        "best_dual": best_dual,
    }
    return SdpSolution(mats, obj, status, viol, eigs, dual=y, info=info)


def feasibility_recentre(p: SdpProblem, z_star, eta, cfg: SolverConfig | None = None) -> SdpSolution:
    """Strictly feasible point of p with objective within eta of z_star.

    Every standard-form block is written X_b = X'_b + tau I with X'_b >= 0;
    the objective bound gets its own slack, shifted by tau as well; the
    program maximizes tau, i.e. the smallest eigenvalue over all blocks.
    Raises RecentreError when tau cannot be made positive (eta too small).
    """
    cfg = cfg or SolverConfig()
    sf = to_standard_form(p)
    q = SdpProblem("max")
    for blk in sf.blocks:
        q.add_block(blk.name, blk.size, blk.kind)
    tau = q.add_block("_tau", 1, DIAG)
    ob = q.add_block("_objslack", 1, DIAG)

    def trace_coef(terms):
        return sum((a for _, i, j, a in terms if i == j), 0)

    for terms, rhs in zip(sf.A, sf.b):
        tr = trace_coef(terms)
        extra = [(tau, 0, 0, tr)] if not (tr == 0) else []
        q.add_constraint("=", rhs, list(terms) + extra)
    # objective (in min form) + slack = z* + eta, i.e. <C, X' + tau I> + s' + tau = bound
    Cmin = sf.C
    bound = coef_fraction(z_star) * sf.sign + coef_fraction(eta)
    q.add_constraint("=", bound, list(Cmin) + [(tau, 0, 0, trace_coef(Cmin) + 1), (ob, 0, 0, 1)])
    q.set_objective([(tau, 0, 0, 1)])
    sol = solve(q, cfg)
    be = backend_for(cfg.precision)
    with be.active():
        t = sol.matrices[tau][0, 0]
        if not sol.status in ("optimal", "feasible") or not float(t) > 10 * cfg.tolerance:
            raise RecentreError(
                f"recentre failed (status {sol.status}, tau {float(t):.3e}); eta too small or problem infeasible"
            )
        mats = []
        for k, blk in enumerate(sf.blocks):
            M = sol.matrices[k].copy()
            for i in range(blk.size):
                M[i, i] = M[i, i] + t
            mats.append(M)
        obj, viol, eigs = evaluate_solution(p, mats)
    info = dict(sol.info, tau=float(t), z_star=float(coef_fraction(z_star)), eta=float(coef_fraction(eta)))
    return SdpSolution(mats, obj, "feasible", viol, eigs, info=info)
