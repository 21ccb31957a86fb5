"""Dense linear algebra over float64 or gmpy2 mpfr object arrays."""

from __future__ import annotations

import contextlib
from fractions import Fraction

import gmpy2
import numpy as np
import scipy.linalg

__all__ = ["Backend", "backend_for", "NotPositiveDefinite", "mpfr_to_fraction"]


class NotPositiveDefinite(ArithmeticError):
    pass


def mpfr_to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (float, np.floating, int)):
        return Fraction(float(x)) if not isinstance(x, int) else Fraction(x)
    q = gmpy2.mpq(x)
    return Fraction(int(q.numerator), int(q.denominator))


class Backend:
    """Float64 (bits == 53) or mpfr object-array arithmetic at a fixed precision."""

    def __init__(self, bits: int = 53):
        self.bits = bits
        self.exact_float = bits == 53
        self.dtype = float if self.exact_float else object

    @contextlib.contextmanager
    def active(self):
        if self.exact_float:
            yield self
        else:
            with gmpy2.context(gmpy2.get_context(), precision=self.bits):
                yield self

    # -- scalars / arrays -----------------------------------------------------
    def scalar(self, x):
        if self.exact_float:
            return float(x)
        if isinstance(x, Fraction):
            return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
        return gmpy2.mpfr(x)

    def array(self, rows) -> np.ndarray:
        a = np.asarray(rows, dtype=object)
        if self.exact_float:
            return np.array(a.tolist(), dtype=float) if a.size else np.zeros(a.shape)
        out = np.empty(a.shape, dtype=object)
        flat_in, flat_out = a.reshape(-1), out.reshape(-1)
        for k, v in enumerate(flat_in):
            flat_out[k] = self.scalar(v)
        return out

    def zeros(self, *shape) -> np.ndarray:
        if self.exact_float:
            return np.zeros(shape)
        z = np.empty(shape, dtype=object)
        z.fill(gmpy2.mpfr(0))
        return z

    def eye(self, n: int, scale=1) -> np.ndarray:
        m = self.zeros(n, n)
        s = self.scalar(scale)
        for i in range(n):
            m[i, i] = s
        return m

    def sqrt(self, x):
        return np.sqrt(x) if self.exact_float else gmpy2.sqrt(x)

    def to_float(self, a) -> np.ndarray:
        return np.array(a, dtype=float)

    def convert(self, a) -> np.ndarray:
        """Bring an array from any back end into this one."""
        a = np.asarray(a)
        if self.exact_float:
            return np.array(a, dtype=float)
        out = np.empty(a.shape, dtype=object)
        for idx, v in np.ndenumerate(a):
            out[idx] = gmpy2.mpfr(v) if not isinstance(v, Fraction) else self.scalar(v)
        return out

    def dot(self, a, b):
        return a @ b

    def norm_inf(self, v) -> float:
        v = np.asarray(v)
        return float(np.max(np.abs(self.to_float(v)))) if v.size else 0.0

    # -- factorizations --------------------------------------------------------
    def cholesky(self, A) -> np.ndarray:
        """Lower-triangular L with A = L L^T; raises NotPositiveDefinite."""
        if self.exact_float:
            try:
                return scipy.linalg.cholesky(A, lower=True)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefinite(str(exc)) from exc
        n = A.shape[0]
        W = A.copy()
        L = self.zeros(n, n)
        for k in range(n):
            d = W[k, k]
            if not d > 0:
                raise NotPositiveDefinite(f"pivot {k} is {float(d):.3e}")
            s = gmpy2.sqrt(d)
            L[k, k] = s
            if k + 1 < n:
                col = W[k + 1:, k] / s
                L[k + 1:, k] = col
                W[k + 1:, k + 1:] = W[k + 1:, k + 1:] - np.outer(col, col)
        return L

    def solve_lower(self, L, B):
        if self.exact_float:
            return scipy.linalg.solve_triangular(L, B, lower=True)
        n = L.shape[0]
        X = np.empty(B.shape, dtype=object)
        for i in range(n):
            acc = B[i] - (L[i, :i] @ X[:i] if i else 0)
            X[i] = acc / L[i, i]
        return X

    def solve_upper(self, U, B):
        if self.exact_float:
            return scipy.linalg.solve_triangular(U, B, lower=False)
        n = U.shape[0]
        X = np.empty(B.shape, dtype=object)
        for i in range(n - 1, -1, -1):
            acc = B[i] - (U[i, i + 1:] @ X[i + 1:] if i + 1 < n else 0)
            X[i] = acc / U[i, i]
        return X

    def chol_solve(self, L, b):
        return self.solve_upper(L.T, self.solve_lower(L, b))

    def inv_spd(self, A):
        """(inverse, cholesky factor) of a symmetric positive definite matrix."""
        L = self.cholesky(A)
        Li = self.solve_lower(L, self.eye(A.shape[0]))
        return Li.T @ Li, L

    def min_eig_congruence(self, L, D) -> float:
        """Smallest eigenvalue of L^-1 D L^-T, evaluated in float64 after the solve."""
        W = self.solve_lower(L, self.solve_lower(L, D).T)
        Wf = self.to_float(W)
        return float(np.linalg.eigvalsh((Wf + Wf.T) / 2)[0])

    def is_pd(self, A) -> bool:
        try:
            self.cholesky(A)
            return True
        except NotPositiveDefinite:
            return False


def backend_for(bits: int) -> Backend:
    if bits not in (53, 113, 256) and bits < 53:
        raise ValueError(f"unsupported precision {bits}")
    return Backend(bits)
